#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "dtc/io.hpp"
#include "dtc/presets.hpp"
#include "dtc/sweep.hpp"

using namespace dtc;
namespace fs = std::filesystem;

namespace {

// Small, fast grid spanning both sides of m = 2 kappa0.
SweepSpec small_spec() {
  SweepSpec spec;
  spec.axis1 = {"epsilon", 0.0, 0.04, 2};
  spec.axis2 = {"m", 0.675, 8.1, 3};
  spec.base.drive = DriveProtocol::from_frequency(1.0, 1.0, 0.0);
  spec.base.schedule = DissipationSchedule::jaynes_cummings(2.7, 2.7, 5);
  spec.base.periods_total = 240;
  spec.base.periods_recorded = 200;
  spec.base.steps_per_period = 256;
  spec.base_seed = 17;
  return spec;
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "dtc_sweep_tests";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  fs::remove(p);
  return p;
}

std::string csv_of(const SweepResult& r) {
  std::ostringstream os;
  write_sweep_csv(os, r);
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("axes and cell layout") {
  const SweepAxis a{"epsilon", 0.0, 0.1, 41};
  CHECK(a.value(0) == 0.0);
  CHECK(a.value(40) == 0.1);
  CHECK(a.value(20) == doctest::Approx(0.05).epsilon(1e-15));
  const SweepAxis single{"m", 2.5, 2.5, 1};
  CHECK(single.value(0) == 2.5);

  const auto spec = small_spec();
  CHECK(spec.cell_count() == 6);
  const auto p = cell_parameters(spec, 4);  // axis1 index 1, axis2 index 1
  CHECK(p.epsilon == 0.04);
  CHECK(p.m == doctest::Approx(4.3875));
  CHECK(p.kappa0 == 2.7);
  CHECK(p.kappa_max == 5);
  CHECK(p.lambda0 == 1.0);
}

TEST_CASE("spec validation") {
  auto spec = small_spec();
  CHECK_NOTHROW(spec.validate());
  spec.axis1.name = "omega";
  CHECK_THROWS(spec.validate());
  spec = small_spec();
  spec.axis2.count = 0;
  CHECK_THROWS(spec.validate());
  spec = small_spec();
  spec.axis2.name = "epsilon";
  CHECK_THROWS(spec.validate());
}

TEST_CASE("cell seeds depend on base seed and index only") {
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) seen.insert(cell_seed(5, i));
  CHECK(seen.size() == 2000);
  CHECK(cell_seed(5, 7) == cell_seed(5, 7));
  CHECK(cell_seed(5, 7) != cell_seed(6, 7));
}

TEST_CASE("cell configs follow the regime") {
  const auto spec = small_spec();
  for (int i = 0; i < spec.cell_count(); ++i) {
    const auto c = cell_config(spec, i);
    const auto p = cell_parameters(spec, i);
    CHECK(c.schedule.m() == p.m);
    CHECK(c.drive.epsilon() == p.epsilon);
    if (c.schedule.regime() == Regime::NonMarkovian) {
      CHECK(c.drive.period() == doctest::Approx(nm_period(c.schedule)).epsilon(1e-14));
    } else {
      CHECK(c.drive.period() == doctest::Approx(kTwoPi).epsilon(1e-14));
    }
    CHECK(c.record_dense);
    CHECK(c.steps_per_period % 2 == 0);
    CHECK(c.steps_per_period >= spec.base.steps_per_period);
    CHECK(c.step_size() <= spec.base.step_size() * (1 + 1e-12));
    CHECK(c.step_size() > 0.99 * spec.base.step_size() * (c.steps_per_period > spec.base.steps_per_period ? 1 : 0));
  }
  auto noisy = small_spec();
  noisy.axis2 = {"a0", 0.0, 0.5, 2};
  const auto c0 = cell_config(noisy, 1);
  REQUIRE(c0.noise.has_value());
  CHECK(c0.noise->a0 == 0.5);
  CHECK(c0.noise->seed == cell_seed(17, 1));
  CHECK_NOTHROW(c0.validate());
}

TEST_CASE("failed cells become Unresolved rows") {
  auto spec = small_spec();
  spec.axis1 = {"lambda0", 0.2, 0.2, 1};
  const auto row = run_cell(spec, 0);
  CHECK(row.label.kind == PhaseKind::Unresolved);
  CHECK_FALSE(row.error_note.empty());
  CHECK(row.error_note.find(',') == std::string::npos);
  CHECK(row.error_note.find('\n') == std::string::npos);
}

TEST_CASE("sweep rows round-trip through the CSV format") {
  SweepRow row;
  row.params = {0.02, 0.675, 2.7, 5, 1, 0.5};
  row.regime = Regime::NonMarkovian;
  row.period = 7.036506143548005;
  row.label.kind = PhaseKind::PeriodN;
  row.label.n = 6;
  row.label.diagnostics.period = 6;
  row.label.diagnostics.variance = NAN;
  row.label.diagnostics.dimension = 0.0;
  row.error_note = "";
  const std::string line = format_sweep_row(row);
  CHECK(split(line, ',').size() == split(kSweepHeader, ',').size());
  const SweepRow back = parse_sweep_row(line);
  CHECK(format_sweep_row(back) == line);
  CHECK(back.label.name() == "Period6");
  CHECK(back.params.m == 0.675);
  CHECK_THROWS(parse_sweep_row("1,2,3"));
  CHECK_THROWS(parse_sweep_row(line.substr(0, line.size() / 2)));
}

TEST_CASE("sweep results are canonical and independent of worker count") {
  auto spec = small_spec();
  const auto one = run_sweep(spec);
  REQUIRE(one.rows.size() == 6);
  CHECK(one.cells_computed == 6);
  for (int i = 0; i < 6; ++i) {
    const auto p = cell_parameters(spec, i);
    CHECK(one.rows[i].params.epsilon == p.epsilon);
    CHECK(one.rows[i].params.m == p.m);
    const Regime r = one.rows[i].regime;
    CHECK(r == regime_of(DissipationSchedule::jaynes_cummings(2.7, p.m, 5)));
    if (p.m > 5.4) CHECK(one.rows[i].period == doctest::Approx(kTwoPi));
  }
  spec.workers = 3;
  const auto three = run_sweep(spec);
  CHECK(csv_of(one) == csv_of(three));
  const std::string csv = csv_of(one);
  CHECK(csv.rfind(std::string(kSweepHeader) + "\n", 0) == 0);
}

TEST_CASE("checkpoint and resume") {
  const auto path = temp_path("resume.ckpt");
  auto spec = small_spec();
  spec.checkpoint_path = path.string();
  std::atomic<int> calls{0};
  const auto full = run_sweep(spec, [&](int, int) { ++calls; });
  CHECK(calls == 6);
  const std::string complete = slurp(path);

  SUBCASE("complete checkpoint runs nothing") {
    const auto again = resume_sweep(path.string());
    CHECK(again.cells_computed == 0);
    CHECK(csv_of(again) == csv_of(full));
  }
  SUBCASE("one missing row is recomputed once") {
    std::string text = complete;
    text.pop_back();
    text.erase(text.rfind('\n') + 1);
    std::ofstream(path, std::ios::binary) << text;
    const auto again = resume_sweep(path.string(), 2);
    CHECK(again.cells_computed == 1);
    CHECK(csv_of(again) == csv_of(full));
  }
  SUBCASE("torn and corrupted rows are recomputed") {
    std::string text = complete;
    // Corrupt the first data row and tear the last one.
    const auto first_row = text.find('\n', text.find('\n') + 1) + 1;
    text.replace(first_row, 5, "zz,zz");
    text.resize(text.size() - 7);
    std::ofstream(path, std::ios::binary) << text;
    const auto again = resume_sweep(path.string());
    CHECK(again.cells_computed == 2);
    CHECK(csv_of(again) == csv_of(full));
    const auto cp = slurp(path);
    CHECK(std::count(cp.begin(), cp.end(), '\n') == 8);
  }
  SUBCASE("a different spec is refused") {
    auto other = spec;
    other.base_seed = 18;
    CHECK_THROWS_AS(run_sweep(other), SweepError);
    CHECK(slurp(path) == complete);
  }
  SUBCASE("tampered header is refused") {
    std::string text = complete;
    const auto pos = text.find("\"base_seed\":17");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 14, "\"base_seed\":19");
    std::ofstream(path, std::ios::binary) << text;
    CHECK_THROWS_AS(resume_sweep(path.string()), SweepError);
  }
  SUBCASE("missing checkpoint") {
    CHECK_THROWS(resume_sweep((path.parent_path() / "absent.ckpt").string()));
  }
}

TEST_CASE("spec JSON round-trip keeps the hash") {
  auto spec = small_spec();
  spec.base.noise = NoiseSettings{0.5, 3, 0.01};
  spec.thresholds.p_max = 9;
  const auto back = sweep_spec_from_json(to_json(spec));
  CHECK(spec_hash(back) == spec_hash(spec));
  CHECK(back.thresholds.p_max == 9);
  auto changed = spec;
  changed.axis2.count = 4;
  CHECK(spec_hash(changed) != spec_hash(spec));
  // Scheduling details are not part of the identity of a sweep.
  changed = spec;
  changed.workers = 8;
  changed.checkpoint_path = "elsewhere";
  CHECK(spec_hash(changed) == spec_hash(spec));
}

TEST_CASE("figure sweep presets") {
  for (const auto& name : sweep_preset_names()) {
    const auto kv = sweep_preset(name);
    REQUIRE(kv.has_value());
    const auto resolved = resolve_sweep(*kv);
    CHECK(resolved.spec.cell_count() == 41 * 41);
    CHECK(resolved.spec.axis1.name == "epsilon");
    CHECK(resolved.spec.axis2.name == "m");
    CHECK(resolved.spec.axis2.min == doctest::Approx(0.05 * 2.7));
    CHECK(resolved.spec.axis2.max == doctest::Approx(3.0 * 2.7));
  }
  CHECK(resolve_sweep(*sweep_preset("fig3a")).spec.base.schedule.kappa_max() == 5);
  CHECK(resolve_sweep(*sweep_preset("fig3b")).spec.base.schedule.kappa_max() == 3);
  CHECK(parse_axis("m:0.135:8.1:41").count == 41);
  const auto axis = parse_axis(format_axis(parse_axis("m:0.135:8.1:41")));
  CHECK(axis.min == 0.135);
  CHECK(axis.max == 8.1);
  CHECK_THROWS(parse_axis("m:0.135:8.1"));
  CHECK_THROWS(parse_axis("m:a:8.1:4"));
}
