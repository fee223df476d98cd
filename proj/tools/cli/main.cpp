#include <cstdlib>
#include <iostream>

#include "malfuse_app/cli.hpp"
#include "malfuse_app/config.hpp"

int main(int argc, char** argv) {
  return malfuse::app::run_cli(argc, argv, std::cout, std::cerr, std::getenv(malfuse::app::kOutEnvVar));
}
