#include "tafilter/cli.hpp"

int main(int argc, char** argv) { return taf::cli::run(argc, argv); }
