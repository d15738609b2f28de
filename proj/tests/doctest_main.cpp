#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "wldm/common.hpp"

int main(int argc, char** argv) {
  // Tests run with per-op NaN/Inf scanning on; training binaries leave it off.
  wldm::set_checked_mode(true);
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
