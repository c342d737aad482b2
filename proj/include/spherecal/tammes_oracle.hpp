#pragma once

#include <optional>
#include <string>
#include <vector>

namespace spherecal {

enum class TammesSource { Analytic, BruteForce };

struct TammesCase {
    std::size_t n = 0;
    std::size_t d = 0;
    double optimal_min_angle = 0.0;  // radians
    TammesSource source = TammesSource::Analytic;
};

// Closed-form optima: antipodal pair, regular polygons on the circle,
// regular simplices (n = d+1) and cross-polytopes (n = 2d).
std::vector<TammesCase> analytic_cases();

// Reference value for (n, d) if one is known; n = 2 matches any d.
std::optional<TammesCase> find_case(std::size_t n, std::size_t d);

// Grid search over the one free gap of an otherwise equal-gap arrangement on
// the circle; the maximum sits at the regular n-gon, 2*pi/n. Only d = 2 is
// supported; higher dimensions are covered by the closed forms above.
TammesCase brute_force_circle(std::size_t n, std::size_t grid_resolution = 20000,
                              std::size_t d = 2);

std::string tammes_cases_csv(const std::vector<TammesCase>& cases);

}  // namespace spherecal
