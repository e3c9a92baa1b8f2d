#include "semileak/cli/cli.hpp"

int main(int argc, char** argv) { return semileak::cli::main(argc, argv); }
