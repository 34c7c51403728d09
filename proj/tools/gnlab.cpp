#include "gnlab/cli.hpp"

int main(int argc, char** argv) { return gnlab::cli::run(argc, argv); }
