#include "canopyscan/cli/cli.hpp"

int main(int argc, char** argv) { return canopyscan::cli::run(argc, argv); }
