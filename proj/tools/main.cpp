#include "gmusic/cli.hpp"

int main(int argc, char** argv) { return gmusic::run_cli(argc, argv); }
