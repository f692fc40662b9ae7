#include "vibfault/cli.hpp"

int main(int argc, char** argv) { return vibfault::cli::run(argc, argv); }
