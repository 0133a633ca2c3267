#include "finj/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return finj::cli::dispatch(args, std::cout, std::cerr);
}
