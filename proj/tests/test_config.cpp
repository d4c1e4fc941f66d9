#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "tbel/config.hpp"

using namespace tbel;

namespace {

ExperimentConfig parse_text(const std::string& s) {
  std::istringstream is(s);
  return ExperimentConfig::parse(is);
}

}  // namespace

TEST_CASE("parses keys, comments and lists") {
  const ExperimentConfig c = parse_text(
      "# sweep\n"
      "seed = 42\n"
      "M_W=100   # inline\n"
      "eps_list = 0.4, 0.2,0.1\n"
      "h_kind = const\n"
      "convention = plain_h\n");
  CHECK(c.seed == 42);
  CHECK(c.M_W == 100);
  CHECK(c.eps_list == std::vector<double>{0.4, 0.2, 0.1});
  CHECK(c.conv() == Convention::Plain);
  CHECK(c.direction().values[3] == 1.0);
  c.validate();
}

TEST_CASE("rejects unknown keys and malformed values") {
  CHECK_THROWS_AS(parse_text("no_such_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_text("M_W = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_text("just a line\n"), ConfigError);
  ExperimentConfig c;
  c.eps = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.M_W = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("smoothness exponent and theta are linked") {
  const ExperimentConfig a = parse_text("theta = 0.8\n");
  CHECK(a.alpha == doctest::Approx(4.3));
  const ExperimentConfig b = parse_text("alpha = 4.1\n");
  CHECK(b.theta == doctest::Approx(0.6));
  CHECK_THROWS_AS(parse_text("alpha = 4.0\ntheta = 0.9\n").validate(), ConfigError);
}

TEST_CASE("builders") {
  ExperimentConfig c;
  c.set("C", "0");
  CHECK(c.profile().degenerate());
  c.set("functional", "interaction");
  c.set("phi_a", "1, 0.5");
  CHECK(c.test_functional().kind() == FunctionalKind::Interaction);
  CHECK(c.test_functional().degree() == 2);
  c.set("h_kind", "zero");
  CHECK(c.direction().sup_c1() == 0.0);
  const QuantileState g = c.initial_quantile();
  CHECK(g.n_u() == static_cast<std::size_t>(c.N_u));
  CHECK(g.available_order() >= 3);
}

TEST_CASE("manifest echoes the source and resolves every knob without timestamps") {
  const ExperimentConfig c = parse_text("seed = 7\nM_beta = 3\n");
  std::ostringstream os;
  c.write_manifest(os, "gradient");
  const std::string m = os.str();
  CHECK(m.find("seed = 7") != std::string::npos);
  CHECK(m.find("[resolved]") != std::string::npos);
  CHECK(m.find("kde_bandwidth") != std::string::npos);
  std::ostringstream again;
  c.write_manifest(again, "gradient");
  CHECK(again.str() == m);
}
