// Command-line front end; subcommands are wired up in cli_main.
#include "xmod/cli/cli_main.hpp"

int main(int argc, char** argv) { return xmod::cli_main(argc, argv); }
