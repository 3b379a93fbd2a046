#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include "nsca/csv.hpp"
#include "nsca/random.hpp"
#include "support.hpp"

using namespace nsca;
using nsca::test::code_of;
using Catch::Matchers::ContainsSubstring;

namespace {

Record awkward_record() {
  Rng rng(1, 0);
  Record r(3, 200);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t k = 0; k < 200; ++k) r.at(c, k) = rng.normal() * std::pow(10.0, rng.uniform(-300.0, 300.0));
  r.at(0, 0) = 0.1;
  r.at(1, 0) = -0.0;
  r.at(2, 0) = std::numeric_limits<double>::denorm_min();
  r.at(0, 1) = std::numeric_limits<double>::max();
  return r;
}

std::string message_of(const std::string& text) {
  std::istringstream in(text);
  try {
    (void)csv::read_record(in);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadInput);
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("records round-trip bit-exactly") {
  const Record r = awkward_record();
  std::stringstream ss;
  csv::write_record(ss, r);
  const Record back = csv::read_record(ss);
  CHECK(back == r);
  CHECK(std::signbit(back.at(1, 0)));
  CHECK(back.channel_names() == std::vector<std::string>{"ch1", "ch2", "ch3"});
}

TEST_CASE("record header names are kept") {
  std::istringstream in("a, b\r\n1,2\r\n\r\n3,4\r\n");
  const Record r = csv::read_record(in);
  CHECK(r.channel_names() == std::vector<std::string>{"a", "b"});
  CHECK(r.length() == 2);
  CHECK(r.at(1, 1) == 4.0);
}

TEST_CASE("malformed records report the line") {
  CHECK_THAT(message_of("ch1,ch2\n1,2\n3,nan\n"), ContainsSubstring("line 3"));
  CHECK_THAT(message_of("ch1,ch2\n1,2\n3,inf\n"), ContainsSubstring("non-finite"));
  CHECK_THAT(message_of("ch1,ch2\n1,2\n3,x\n"), ContainsSubstring("line 3"));
  CHECK_THAT(message_of("ch1,ch2\n1,2\n\n3\n"), ContainsSubstring("line 4"));
  CHECK_THAT(message_of("ch1,ch2\n1,2,3\n"), ContainsSubstring("expected 2 columns"));
  CHECK_THAT(message_of("ch1,ch2\n1e999,2\n"), ContainsSubstring("line 2"));
  CHECK_THAT(message_of("ch1,ch2\n"), ContainsSubstring("header"));
  CHECK_THAT(message_of("ch1\n,\n"), ContainsSubstring("line 2"));
}

TEST_CASE("index series round-trip") {
  IndexSeries idx{{0.0, 1.0 / 3.0, -2.5e-17, 1e300}, 2, "x"};
  std::stringstream ss;
  csv::write_index(ss, idx);
  CHECK(ss.str().rfind("k,value\n0,0\n", 0) == 0);
  const IndexSeries back = csv::read_index(ss);
  CHECK(back.values == idx.values);
  CHECK(back.valid_from == 0);

  std::istringstream gap("k,value\n0,1\n2,3\n");
  CHECK(code_of([&] { (void)csv::read_index(gap); }) == ErrorCode::BadInput);
}

TEST_CASE("partitions round-trip and infer K") {
  const Partition p = Partition::from_labels({0, 2, 1, 0, 2}, 3);
  std::stringstream ss;
  csv::write_partition(ss, p);
  CHECK(csv::read_partition(ss) == p);

  std::istringstream ones("k,label\n0,0\n1,0\n");
  CHECK(csv::read_partition(ones).classes == 2);
  std::istringstream neg("k,label\n0,0\n1,-1\n");
  CHECK(code_of([&] { (void)csv::read_partition(neg); }) == ErrorCode::BadInput);
  std::istringstream frac("k,label\n0,0\n1,0.5\n");
  CHECK(code_of([&] { (void)csv::read_partition(frac); }) == ErrorCode::BadInput);
}

TEST_CASE("matrices round-trip") {
  const Matrix m{{1.0, -1.0 / 7.0, 3e-300}, {std::acos(-1.0), 0.0, -5.0}};
  std::stringstream ss;
  csv::write_matrix(ss, m);
  CHECK(csv::read_matrix(ss) == m);

  std::istringstream ragged("1,2\n3\n");
  CHECK(code_of([&] { (void)csv::read_matrix(ragged); }) == ErrorCode::BadInput);
  std::istringstream empty("");
  CHECK(code_of([&] { (void)csv::read_matrix(empty); }) == ErrorCode::BadInput);
}

TEST_CASE("spectra format") {
  std::ostringstream out;
  csv::write_spectra(out, {{2.0, 0.5}, {1.0, 0.25}});
  CHECK(out.str() == "class,component,value\n0,0,2\n0,1,0.5\n1,0,1\n1,1,0.25\n");
}

TEST_CASE("format_double uses 17 significant digits") {
  CHECK(csv::format_double(0.1) == "0.10000000000000001");
  CHECK(csv::format_double(1.0) == "1");
  CHECK(csv::format_double(-2.5) == "-2.5");
}

TEST_CASE("missing files are input errors") {
  CHECK(code_of([] { (void)csv::load_record("/nonexistent/record.csv"); }) == ErrorCode::BadInput);
}
