#include "htspec/cli.hpp"

int main(int argc, char** argv) { return htspec::cli::run(argc, argv); }
