#include "zfepr/commands.hpp"

int main(int argc, char** argv) { return zfepr::run_cli(argc, argv); }
