#include <doctest.h>

#include <stdexcept>

#include "gexp/sign_process.hpp"

using gexp::SignProcess;

TEST_CASE("alternating signs on right-closed cells") {
  const SignProcess d(4, 1.0);
  CHECK(d.sign_at(0.1) == 1);
  CHECK(d.sign_at(0.25) == 1);    // boundary belongs to the cell on its left
  CHECK(d.sign_at(0.3) == -1);
  CHECK(d.sign_at(0.5) == -1);
  CHECK(d.sign_at(0.6) == 1);
  CHECK(d.sign_at(0.75) == 1);
  CHECK(d.sign_at(0.8) == -1);
  CHECK(d.sign_at(1.0) == -1);
  CHECK(d.sign_at(0.0) == 1);     // s = 0 fixed by convention
}

TEST_CASE("cell indices and boundaries") {
  const SignProcess d(4, 2.0);
  CHECK(d.cell_index(0.0) == -1);
  CHECK(d.cell_index(0.5) == 0);
  CHECK(d.cell_index(0.50000001) == 1);
  CHECK(d.cell_index(2.0) == 3);
  CHECK(d.cell_length() == 0.5);
  const auto b = d.boundaries();
  REQUIRE(b.size() == 5);
  CHECK(b[0] == 0.0);
  CHECK(b[2] == 1.0);
  CHECK(b[4] == 2.0);
}

TEST_CASE("odd n ends on a negative cell only when n is even") {
  const SignProcess odd(3, 1.0);
  CHECK(odd.sign_at(1.0) == 1);   // cell 2
  const SignProcess even(2, 1.0);
  CHECK(even.sign_at(1.0) == -1); // cell 1
}

TEST_CASE("sign process validation") {
  CHECK_THROWS_AS(SignProcess(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(SignProcess(2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)SignProcess(2, 1.0).sign_at(1.5), std::out_of_range);
}
