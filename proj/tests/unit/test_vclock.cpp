#include "doctest.h"
#include "vcreplay/vclock.hpp"

using namespace vcreplay;

TEST_CASE("zero and unit clocks") {
  CHECK(VectorClock::zero(3) == VectorClock{0, 0, 0});
  CHECK(VectorClock::unit(2, 3) == VectorClock{0, 1, 0});
  CHECK_THROWS_AS(VectorClock::unit(0, 3), ClockError);
  CHECK_THROWS_AS(VectorClock::unit(4, 3), ClockError);
}

TEST_CASE("inc ticks one component") {
  VectorClock c{1, 0, 2};
  CHECK(c.inc(1) == VectorClock{2, 0, 2});
  CHECK(inc(3, c) == VectorClock{1, 0, 3});
  CHECK(c == VectorClock{1, 0, 2});
  CHECK(c[3] == 2);
  CHECK_THROWS_AS(c.inc(4), ClockError);
}

TEST_CASE("join is the pointwise maximum") {
  CHECK(join(VectorClock{2, 0, 2}, VectorClock{1, 3, 0}) == VectorClock{2, 3, 2});
  CHECK_THROWS_AS(join(VectorClock{1, 2}, VectorClock{1, 2, 3}), ClockError);
}

TEST_CASE("compare: happens-before with at least one strict component") {
  CHECK(compare(VectorClock{1, 0}, VectorClock{1, 1}) == Ordering::Before);
  CHECK(compare(VectorClock{2, 1}, VectorClock{1, 1}) == Ordering::After);
  CHECK(compare(VectorClock{1, 1}, VectorClock{1, 1}) == Ordering::Equal);
  CHECK(compare(VectorClock{1, 1, 0, 0, 0}, VectorClock{4, 0, 0, 2, 2}) == Ordering::Concurrent);
  CHECK(compare(VectorClock{2, 2, 2, 0, 0}, VectorClock{4, 2, 3, 3, 2}) == Ordering::Before);
  CHECK(VectorClock{1, 0}.concurrent_with(VectorClock{0, 1}));
}

TEST_CASE("leq and strictly_greater") {
  CHECK(VectorClock{1, 1}.leq(VectorClock{1, 1}));
  CHECK(VectorClock{1, 0}.leq(VectorClock{1, 1}));
  CHECK_FALSE(VectorClock{2, 0}.leq(VectorClock{1, 1}));
  // strictly_greater needs every component strictly larger.
  CHECK(VectorClock{2, 2}.strictly_greater(VectorClock{1, 1}));
  CHECK_FALSE(VectorClock{2, 1}.strictly_greater(VectorClock{1, 1}));
}

TEST_CASE("sum and rendering") {
  CHECK(VectorClock{3, 0, 2}.sum() == 5);
  CHECK(VectorClock{3, 0, 2}.str() == "[3,0,2]");
  CHECK(std::string(to_string(Ordering::Concurrent)) == "concurrent");
}
