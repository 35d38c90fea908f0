#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "momentlab/experiment_config.hpp"

using namespace momentlab;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;
  explicit TempFile(const char* stem)
      : path(fs::temp_directory_path() / (std::string("momentlab_") + stem)) {}
  ~TempFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
  std::string str() const { return path.string(); }
};

const std::vector<KeySpec> kSpec = {
    {"alpha", "1", "an integer"},
    {"beta", "2.5", "a number"},
    {"name", "hello", "free text"},
    {"active", "true", "a flag"},
    {"sizes", "1,2,3", "an integer list"},
    {"weights", "0.5,1.5", "a number list"},
};

}  // namespace

TEST_CASE("key value text parses with comments and blank lines") {
  const auto kv = parse_key_values(
      "# leading comment\n"
      "\n"
      "  alpha = 12  \n"
      "name = two words   # trailing comment\n"
      "empty =\n");
  CHECK(kv.size() == 3);
  CHECK(kv.at("alpha") == "12");
  CHECK(kv.at("name") == "two words");
  CHECK(kv.at("empty") == "");

  CHECK_THROWS_AS(parse_key_values("justakey\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_key_values("= value\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_key_values("a = 1\na = 2\n"), std::invalid_argument);
}

TEST_CASE("resolved configs fill defaults and reject unknown keys") {
  const ResolvedConfig defaults(kSpec, {});
  CHECK(defaults.str("alpha") == "1");
  CHECK(defaults.str("name") == "hello");

  const ResolvedConfig tweaked(kSpec, {{"alpha", "7"}, {"name", "other"}});
  CHECK(tweaked.i64("alpha") == 7);
  CHECK(tweaked.str("name") == "other");
  CHECK(tweaked.str("beta") == "2.5");

  try {
    ResolvedConfig bad(kSpec, {{"alhpa", "7"}});
    FAIL("unknown key accepted");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("alhpa") != std::string::npos);
    CHECK(msg.find("alpha") != std::string::npos);  // the known list is echoed
  }
  CHECK_THROWS_AS(defaults.str("missing"), std::logic_error);
}

TEST_CASE("typed getters parse strictly") {
  const ResolvedConfig cfg(kSpec, {});
  CHECK(cfg.i64("alpha") == 1);
  CHECK(cfg.f64("beta") == 2.5);
  CHECK(cfg.flag("active"));
  CHECK(cfg.i64_list("sizes") == std::vector<int64_t>{1, 2, 3});
  CHECK(cfg.u64_list("sizes") == std::vector<uint64_t>{1, 2, 3});
  CHECK(cfg.f64_list("weights") == std::vector<double>{0.5, 1.5});

  const ResolvedConfig bad(kSpec, {{"alpha", "12x"},
                                   {"beta", "fast"},
                                   {"active", "maybe"},
                                   {"sizes", "1,-2"},
                                   {"weights", ""}});
  CHECK_THROWS_AS(bad.i64("alpha"), std::invalid_argument);
  CHECK_THROWS_AS(bad.f64("beta"), std::invalid_argument);
  CHECK_THROWS_AS(bad.flag("active"), std::invalid_argument);
  CHECK(bad.i64_list("sizes") == std::vector<int64_t>{1, -2});
  CHECK_THROWS_AS(bad.u64_list("sizes"), std::invalid_argument);  // negative entry
  CHECK_THROWS_AS(bad.f64_list("weights"), std::invalid_argument);  // empty list

  for (const char* yes : {"true", "1", "yes", "on"})
    CHECK(ResolvedConfig(kSpec, {{"active", yes}}).flag("active"));
  for (const char* no : {"false", "0", "no", "off"})
    CHECK_FALSE(ResolvedConfig(kSpec, {{"active", no}}).flag("active"));
}

TEST_CASE("canonical text is sorted and drives the hash") {
  const ResolvedConfig cfg(kSpec, {{"name", "zz"}});
  const std::string text = cfg.canonical_text();
  CHECK(text ==
        "active=true\nalpha=1\nbeta=2.5\nname=zz\nsizes=1,2,3\nweights=0.5,1.5\n");
  CHECK(cfg.hash() == fnv1a64(text));

  const ResolvedConfig other(kSpec, {{"name", "zy"}});
  CHECK(cfg.hash() != other.hash());
  CHECK(ResolvedConfig(kSpec, {{"name", "zz"}}).hash() == cfg.hash());

  // FNV-1a 64 fixed points keep the hash format honest across platforms
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 12638187200555641996ull);
}

TEST_CASE("config files round trip through the parser") {
  TempFile f("keys.cfg");
  {
    std::ofstream out(f.str());
    out << "# experiment overrides\nalpha = 3\n\nsizes = 4,5\n";
  }
  const auto kv = parse_key_value_file(f.str());
  const ResolvedConfig cfg(kSpec, kv);
  CHECK(cfg.i64("alpha") == 3);
  CHECK(cfg.i64_list("sizes") == std::vector<int64_t>{4, 5});
  CHECK(cfg.str("name") == "hello");

  CHECK_THROWS_AS(parse_key_value_file("/nonexistent/momentlab.cfg"), std::runtime_error);
}
