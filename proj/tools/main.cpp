#include "cli.hpp"

int main(int argc, char** argv) { return imputelab::cli::run(argc, argv); }
