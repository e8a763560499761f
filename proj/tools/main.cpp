#include "dtstereo/cli.hpp"

int main(int argc, char** argv) { return dtstereo::run(argc, argv); }
