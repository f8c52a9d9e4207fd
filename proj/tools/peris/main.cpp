#include "peris/app.hpp"

int main(int argc, char** argv) { return peris::app::run(argc, argv); }
