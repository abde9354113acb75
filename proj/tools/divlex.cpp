#include "divlex/cli.hpp"

int main(int argc, char** argv) { return divlex::cli::run(argc, argv); }
