#include "cli.hpp"

int main(int argc, char** argv) { return propseg::cli::run(argc, argv); }
