#include "spherecal/tammes_oracle.hpp"

#include <algorithm>
#include <cmath>

#include "spherecal/errors.hpp"
#include "spherecal/io.hpp"

namespace spherecal {

namespace {
const double kPi = std::acos(-1.0);
}

std::vector<TammesCase> analytic_cases() {
    std::vector<TammesCase> cases;
    auto add = [&](std::size_t n, std::size_t d, double angle) {
        for (const auto& c : cases)
            if (c.n == n && c.d == d) return;
        cases.push_back({n, d, angle, TammesSource::Analytic});
    };
    // antipodal pair, any dimension
    add(2, 2, kPi);
    add(2, 3, kPi);
    add(2, 4, kPi);
    // regular polygons on the circle
    add(3, 2, 2.0 * kPi / 3.0);
    add(4, 2, kPi / 2.0);
    add(5, 2, 2.0 * kPi / 5.0);
    // regular simplex: n = d+1 points at arccos(-1/d)
    for (std::size_t d = 2; d <= 4; ++d) add(d + 1, d, std::acos(-1.0 / static_cast<double>(d)));
    // cross-polytope: n = 2d orthonormal pairs
    for (std::size_t d = 2; d <= 3; ++d) add(2 * d, d, kPi / 2.0);
    return cases;
}

std::optional<TammesCase> find_case(std::size_t n, std::size_t d) {
    if (n == 2 && d >= 2) return TammesCase{2, d, kPi, TammesSource::Analytic};
    for (const auto& c : analytic_cases())
        if (c.n == n && c.d == d) return c;
    return std::nullopt;
}

TammesCase brute_force_circle(std::size_t n, std::size_t grid_resolution, std::size_t d) {
    if (d != 2) throw UnsupportedDimension("circle brute force only handles d = 2");
    if (n < 2 || n > 8) throw Error("circle brute force supports 2 <= n <= 8");
    if (grid_resolution < 10000) throw Error("grid resolution must be >= 10^4");

    // Points at angles 0, t, t + g, t + 2g, ... with g = (2*pi - t)/(n - 1):
    // one gap t is free, the rest stay equal. The pairwise angle on the
    // circle is the arc wrapped to [0, pi].
    auto min_pairwise = [&](double t) {
        std::vector<double> phi(n);
        phi[0] = 0.0;
        const double g = n > 1 ? (2.0 * kPi - t) / static_cast<double>(n - 1) : 0.0;
        for (std::size_t i = 1; i < n; ++i) phi[i] = t + g * static_cast<double>(i - 1);
        double mn = kPi;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                double a = std::fmod(std::abs(phi[i] - phi[j]), 2.0 * kPi);
                if (a > kPi) a = 2.0 * kPi - a;
                mn = std::min(mn, a);
            }
        return mn;
    };

    double best = 0.0;
    for (std::size_t k = 1; k <= grid_resolution; ++k) {
        const double t = kPi * static_cast<double>(k) / static_cast<double>(grid_resolution);
        best = std::max(best, min_pairwise(t));
    }
    return {n, 2, best, TammesSource::BruteForce};
}

std::string tammes_cases_csv(const std::vector<TammesCase>& cases) {
    std::string out = "n,d,optimal_min_angle_radians,source\n";
    for (const auto& c : cases) {
        out += std::to_string(c.n);
        out += ',';
        out += std::to_string(c.d);
        out += ',';
        out += format_shortest(c.optimal_min_angle);
        out += ',';
        out += (c.source == TammesSource::Analytic ? "analytic" : "brute_force");
        out += '\n';
    }
    return out;
}

}  // namespace spherecal
