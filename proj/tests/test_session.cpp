#include <doctest.h>

#include <fstream>
#include <sstream>

#include "psyseg/session.hpp"
#include "support.hpp"

using namespace psyseg;
using namespace psyseg::session;
namespace fs = std::filesystem;

namespace {

SessionConfig small_config(std::uint64_t seed = 5) {
  SessionConfig c;
  c.synthetic.width = 360;
  c.synthetic.height = 180;
  c.superpixels = 72;
  c.quotas = {40, 40, 40};
  c.training.epochs = 5;
  c.seed = seed;
  return c;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("a session writes its artefacts and survives reopening") {
  const auto dir = testing::scratch_dir("session") / "s";
  auto s = Session::create(dir, small_config());
  for (const char* f : {"config.json", "image.png", "truth.png", "features.json", "oracle.json", "model.json",
                        "responses.jsonl", "state.json", "superpixels.json", "labels.png"})
    CHECK_MESSAGE(fs::exists(dir / f), f);
  CHECK(s.phase() == Phase::Collecting);
  CHECK(s.quota() == 40);
  CHECK_FALSE(s.tree().has_value());
  CHECK(s.features().rows() == s.superpixels().count());
  CHECK(s.features().cols() == 92);
  CHECK_THROWS_AS(Session::create(dir, small_config()), std::runtime_error);

  // Answer a few by hand, then check the quota guard.
  for (int i = 0; i < 3; ++i) {
    const auto q = s.next_query();
    REQUIRE(q.has_value());
    CHECK(s.record_response(q->id, i % 3, query::ResponseSource::Human, i));
  }
  const auto first = s.pending().front().id;
  CHECK_FALSE(s.record_response(first, 1, query::ResponseSource::Human, 9));
  CHECK(s.answered_this_iteration() == 3);
  CHECK_THROWS_AS(s.record_response("nope", 0, query::ResponseSource::Human, 0), std::out_of_range);
  CHECK_THROWS_AS(s.record_response(s.next_query()->id, 3, query::ResponseSource::Human, 0), std::invalid_argument);
  try {
    s.iterate();
    FAIL("iterate should need the full quota");
  } catch (const QuotaNotMet& e) {
    CHECK(e.remaining() == 37);
    CHECK(std::string(e.what()).find("quota not reached") != std::string::npos);
  }

  // Reopening replays the log, including which pending queries were answered.
  auto back = Session::open(dir);
  CHECK(back.answered_this_iteration() == 3);
  CHECK(back.responses().size() == 3);
  CHECK(back.next_query()->id == s.next_query()->id);
  CHECK(back.features() == s.features());
  CHECK(back.superpixels() == s.superpixels());

  back.run_all();
  CHECK(back.phase() == Phase::Complete);
  CHECK_FALSE(back.next_query().has_value());
  CHECK_THROWS_AS(back.iterate(), std::logic_error);
  CHECK(back.answered_total() == 120);
  CHECK(back.reports().size() == 3);
  for (const auto& r : back.reports()) {
    CHECK(r.dendrogram_purity > 0);
    CHECK(r.dendrogram_purity <= 1);
  }
  CHECK(back.reports().back().responses == 120);
  CHECK(back.reports().back().enhanced > 0);
  back.tree()->validate();
  for (const char* f : {"hierarchy.json", "curve.csv", "palette.json", "segmentation_L0.png", "reports/report_2.json"})
    CHECK_MESSAGE(fs::exists(dir / f), f);
  for (int l = 0; l <= back.tree()->depth(); ++l) CHECK(fs::exists(back.overlay_path(l)));

  const auto done = Session::open(dir);
  CHECK(done.phase() == Phase::Complete);
  CHECK(done.reports().size() == 3);
  CHECK(done.tree()->to_json() == back.tree()->to_json());
  CHECK(done.responses().size() == back.responses().size());
}

TEST_CASE("oracle sessions are deterministic and resumable") {
  const auto root = testing::scratch_dir("session_det");
  auto a = Session::create(root / "a", small_config(11));
  a.run_all();
  auto b = Session::create(root / "b", small_config(11));
  b.run_iteration();
  auto resumed = Session::open(root / "b");
  resumed.run_all();
  CHECK(bytes(root / "a" / "responses.jsonl") == bytes(root / "b" / "responses.jsonl"));
  CHECK(bytes(root / "a" / "hierarchy.json") == bytes(root / "b" / "hierarchy.json"));
  CHECK(bytes(root / "a" / "curve.csv") == bytes(root / "b" / "curve.csv"));

  auto other = Session::create(root / "c", small_config(12));
  other.run_iteration();
  CHECK(bytes(root / "a" / "responses.jsonl").substr(0, 2000) !=
        bytes(root / "c" / "responses.jsonl").substr(0, 2000));
}

TEST_CASE("variants change selection and enhancement") {
  auto cfg = small_config(3);
  cfg.variant = Variant::Random;
  CHECK_FALSE(cfg.effective_query().active);
  CHECK(cfg.effective_query().enhancement_factor == 1.0);
  cfg.variant = Variant::Active;
  CHECK(cfg.effective_query().active);
  CHECK(cfg.effective_query().enhancement_factor == 1.0);
  cfg.variant = Variant::ActiveEnhance;
  CHECK(cfg.effective_query().enhancement_factor == 2.0);

  const auto root = testing::scratch_dir("session_variants");
  cfg.quotas = {40, 40};
  cfg.render = false;
  cfg.variant = Variant::Random;
  auto r = Session::create(root / "random", cfg);
  r.run_all();
  CHECK(r.reports().back().enhanced == 0);
  CHECK(r.reports().back().selection["rejected_confident"] == 0);
  CHECK(r.reports().back().selection["rejected_ambiguous"] == 0);
  CHECK(r.reports().back().variant == "random");
  CHECK_FALSE(fs::exists(root / "random" / "segmentation_L0.png"));

  cfg.variant = Variant::ActiveEnhance;
  auto e = Session::create(root / "enhance", cfg);
  e.run_all();
  // Factor 2 doubles each iteration's fresh answers.
  CHECK(e.reports().back().enhanced == 80);
  CHECK(e.responses().size() == 160);
}

TEST_CASE("config json roundtrip, presets and validation") {
  auto cfg = small_config(9);
  cfg.variant = Variant::Active;
  cfg.participant = 2;
  const auto back = session_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));

  CHECK(quota_preset("synthetic") == std::vector<int>(10, 800));
  const auto histo = quota_preset("histology");
  CHECK(histo.size() == 10);
  CHECK(histo.front() == 1500);
  CHECK(histo.back() == 1000);
  CHECK(quota_preset("aerial") == std::vector<int>{600, 400, 400, 400, 400});
  CHECK_THROWS_AS(quota_preset("satellite"), std::invalid_argument);

  nlohmann::json j = to_json(cfg);
  j["quotas"] = "aerial";
  CHECK(session_config_from_json(j).quotas.front() == 600);
  j["quotas"] = 30;
  j["iterations"] = 4;
  CHECK(session_config_from_json(j).quotas == std::vector<int>(4, 30));

  CHECK(variant_from_string("active+enhance") == Variant::ActiveEnhance);
  CHECK_THROWS_AS(variant_from_string("greedy"), std::invalid_argument);
  auto bad = cfg;
  bad.quotas = {};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.participant = 3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.image_path = "photo.png";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
