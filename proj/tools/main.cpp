#include <string>
#include <vector>

#include "dmicp/experiment.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dmicp::cli_main(args);
}
