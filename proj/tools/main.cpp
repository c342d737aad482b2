#include "spherecal/cli.hpp"

int main(int argc, char** argv) { return spherecal::run_cli(argc, argv); }
