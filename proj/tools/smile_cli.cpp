#include "cli.hpp"

int main(int argc, char** argv) { return smile::cli::run(argc, argv); }
