#include "mcpad/cli.hpp"

int main(int argc, char** argv) { return mcpad::cli::run(argc, argv); }
