#include <string>
#include <vector>

#include "suskit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return suskit::dispatch(args);
}
