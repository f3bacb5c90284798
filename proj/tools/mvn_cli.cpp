// Command-line front end: mvngrad <spike|vgap|vgap-mlp|separation|train|bounds> [options]

#include <string>
#include <vector>

#include "mvn/report/run.hpp"

int main(int argc, char** argv) {
  return mvn::report::main_entry(std::vector<std::string>(argv + 1, argv + argc));
}
