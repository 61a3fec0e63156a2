#include "cta/cli.hpp"

int main(int argc, char** argv) { return cta::cli::run(argc, argv); }
