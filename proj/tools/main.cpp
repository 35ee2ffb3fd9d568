#include "cli.hpp"

int main(int argc, char** argv) { return homeauth::cli::run(argc, argv); }
