#include "qmpo/cli.hpp"

int main(int argc, char** argv) { return qmpo::cli::run(argc, argv); }
