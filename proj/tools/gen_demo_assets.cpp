// Writes the offline demo assets (task files + scripted fixtures) into a
// directory, so every CLI subcommand can be exercised without a model
// endpoint. See README for the walkthrough.

#include <iostream>

#include "demo/demo_assets.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: nest-demo-assets DIR\n";
    return 1;
  }
  try {
    nest::demo::write_demo_assets(argv[1]);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cout << "wrote demo assets to " << argv[1] << "\n";
  return 0;
}
