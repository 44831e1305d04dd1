#include "errdyn/acceptance.hpp"

int main() { return errdyn::acceptance_main(); }
