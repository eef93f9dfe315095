#include <iostream>
#include <string>
#include <vector>

#include "cellq/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    const cellq::RunPlan plan = cellq::parse_invocation(args);
    return cellq::run_plan(plan, std::cout, std::cerr);
  } catch (const cellq::usage_error& e) {
    std::cerr << "error: " << e.what() << "\n\n" << cellq::usage_text();
    return 2;
  }
}
