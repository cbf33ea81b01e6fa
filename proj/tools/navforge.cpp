#include "navforge/cli.hpp"

int main(int argc, char** argv) { return navforge::cli::run(argc, argv); }
