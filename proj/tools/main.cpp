#include "specmc/cli.hpp"

int main(int argc, char** argv) { return specmc::cli_main(argc, argv); }
