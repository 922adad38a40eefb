#include <iostream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "layermix/logging.hpp"

int main(int argc, char** argv) {
  layermix::log::init_from_env();
  std::vector<std::string> args(argv + 1, argv + argc);
  return layermix::cli::run(args, std::cout, std::cerr);
}
