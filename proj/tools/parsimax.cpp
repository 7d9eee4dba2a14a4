#include <iostream>
#include <string>
#include <vector>

#include "parsimax/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  const parsimax::cli::Outcome r = parsimax::cli::run(args);
  std::cout << r.out;
  std::cerr << r.err;
  return r.exit_code;
}
