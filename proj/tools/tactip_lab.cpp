#include "lab_app.hpp"

int main(int argc, char** argv) { return tactip::lab::run_lab(argc, argv); }
