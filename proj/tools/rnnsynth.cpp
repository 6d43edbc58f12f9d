// Command-line front end; subcommands are wired up in cli_main.
#include "rnnsynth/cli.hpp"

int main(int argc, char** argv) { return rnnsynth::cli_main(argc, argv); }
