#include "gazegan_cli/cli.hpp"

int main(int argc, char** argv) { return gazegan::cli::dispatch(argc, argv); }
