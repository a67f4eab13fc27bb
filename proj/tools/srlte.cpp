#include "srlte/cli.hpp"

int main(int argc, char** argv) { return srlte::cli::run(argc, argv); }
