#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <regex>
#include <sstream>

#include "deffx/analysis/response.hpp"
#include "deffx/core/error.hpp"
#include "support.hpp"

namespace deffx::analysis {
namespace {

namespace fs = std::filesystem;
using model::GrayBoxModel;

std::unique_ptr<model::Model<double>> graybox(const std::string& chain, std::size_t nc = 0) {
  model::ModelSpec s;
  s.arch = model::Arch::kGrayBox;
  s.num_controls = nc;
  s.graybox.stages = model::parse_chain(chain);
  s.graybox.block_size = 64;
  return model::build_model<double>(s);
}

GrayBoxModel<double>& gb(const std::unique_ptr<model::Model<double>>& m) {
  return dynamic_cast<GrayBoxModel<double>&>(*m);
}

fs::path temp(const std::string& name) { return fs::temp_directory_path() / ("deffx_analysis_" + name); }

// Minimal well-formedness check: balanced tags and a single root element.
bool well_formed_xml(const std::string& doc) {
  std::vector<std::string> stack;
  int roots = 0;
  const std::regex tag(R"(<(/?)([A-Za-z_][\w:.-]*)((?:\s+[\w:.-]+\s*=\s*"[^"<]*")*)\s*(/?)>)");
  std::string body = std::regex_replace(doc, std::regex(R"(<\?xml[^>]*\?>)"), "");
  auto it = std::sregex_iterator(body.begin(), body.end(), tag);
  std::size_t tags = 0, lt = std::count(body.begin(), body.end(), '<');
  for (; it != std::sregex_iterator(); ++it, ++tags) {
    const auto& m = *it;
    if (m[1] == "/") {
      if (stack.empty() || stack.back() != m[2]) return false;
      stack.pop_back();
    } else if (m[4] != "/") {
      if (stack.empty()) ++roots;
      stack.push_back(m[2]);
    } else if (stack.empty()) {
      ++roots;
    }
  }
  return stack.empty() && roots == 1 && tags == lt;
}

TEST(Sweep, TailLengthRule) {
  EXPECT_EQ(tail_length(5.0, 48000, 10.0), 24000u);
  SweepConfig cfg;
  EXPECT_EQ(cfg.tail_length(), 24000u);
  EXPECT_EQ(cfg.signal_length(), 240000u);
  const auto f = cfg.frequencies();
  ASSERT_EQ(f.size(), 50u);
  EXPECT_DOUBLE_EQ(f.front(), 10.0);
  EXPECT_NEAR(f.back(), 21600.0, 1e-9);
  for (std::size_t i = 1; i < f.size(); ++i) EXPECT_NEAR(f[i] / f[i - 1], f[1] / f[0], 1e-12);
}

TEST(Sweep, ConfigValidation) {
  SweepConfig cfg;
  cfg.f2 = 30000;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.steps = 1;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.f1 = 1.0;  // tail = T * fs exceeds half of the render
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.duration = 0.5;  // tail shorter than one period of f1
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(Sweep, ProjectionRecoversAmplitudeAndPhase) {
  std::vector<double> x(10000);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = 0.3 * std::cos(2 * std::numbers::pi * 1234.5 * n / 48000 + 0.7);
  const auto c = project(x, 1234.5, 48000);
  std::vector<double> unit(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) unit[n] = std::cos(2 * std::numbers::pi * 1234.5 * n / 48000);
  const auto h = c / project(unit, 1234.5, 48000);
  EXPECT_NEAR(std::abs(h), 0.3, 1e-4);
  EXPECT_NEAR(std::arg(h), 0.7, 1e-4);
  EXPECT_THROW(project(std::vector<double>(10, 0.0), 100.0, 48000), InvalidArgument);
}

TEST(Sweep, GainIsFlat) {
  auto m = graybox("G.s");
  gb(m).set_static_physical(0, {-6.02});
  const auto curve = stepped_sine_response(*m, SweepConfig{}, {});
  ASSERT_EQ(curve.freqs.size(), 50u);
  for (std::size_t i = 0; i < curve.freqs.size(); ++i) {
    EXPECT_NEAR(curve.magnitude_db[i], -6.02, 0.01);
    EXPECT_NEAR(curve.phase_rad[i], 0.0, 1e-3);
  }
}

TEST(Sweep, PhaseInversion) {
  auto m = graybox("PI");
  SweepConfig cfg;
  cfg.duration = 1.0;
  cfg.steps = 10;
  const auto curve = stepped_sine_response(*m, cfg, {});
  for (std::size_t i = 0; i < curve.freqs.size(); ++i) {
    EXPECT_NEAR(curve.magnitude_db[i], 0.0, 1e-9);
    EXPECT_NEAR(std::abs(curve.phase_rad[i]), std::numbers::pi, 1e-6);
    EXPECT_NEAR(curve.phase_rad[i], curve.phase_rad[0], 1e-6);
  }
}

TEST(Sweep, LowpassMatchesAnalyticResponse) {
  auto m = graybox("G.s > LP.s");
  gb(m).set_static_physical(0, {3.0});
  gb(m).set_static_physical(1, {2500.0, 2.0});
  SweepConfig cfg;
  cfg.duration = 1.0;
  cfg.steps = 16;
  const auto measured = stepped_sine_response(*m, cfg, {});
  auto sections = gb(m).processor(1).sections({2500.0, 2.0});
  const auto expected = analytic_response(sections, measured.freqs, cfg.fs);
  for (std::size_t i = 0; i < measured.freqs.size(); ++i) {
    EXPECT_NEAR(measured.magnitude_db[i], expected.magnitude_db[i] + 3.0, 0.05) << measured.freqs[i];
    EXPECT_NEAR(measured.phase_rad[i], expected.phase_rad[i], 0.02) << measured.freqs[i];
  }
}

TEST(Sweep, RecurrentModelIsDeterministic) {
  auto m = graybox("G.d");
  SweepConfig cfg;
  cfg.duration = 1.0;
  cfg.f1 = 100;
  cfg.steps = 3;
  cfg.warmup = 0.25;
  const auto a = stepped_sine_response(*m, cfg, {});
  const auto b = stepped_sine_response(*m, cfg, {});
  EXPECT_EQ(a.magnitude_db, b.magnitude_db);
  EXPECT_EQ(a.phase_rad, b.phase_rad);
}

TEST(Unwrap, RemovesJumps) {
  std::vector<double> p = {3.0, -3.1, 2.9, 0.5};
  unwrap(p);
  EXPECT_NEAR(p[1], -3.1 + 2 * std::numbers::pi, 1e-12);
  EXPECT_NEAR(p[2], 2.9, 1e-12);
  EXPECT_NEAR(p[3], 0.5, 1e-12);
}

TEST(Amplitude, TanhAndRationalAgainstReference) {
  Rng rng(1);
  auto tanh_proc = dsp::make_processor<double>({.kind = "tanh"}, 48000, rng, "t");
  const auto a = amplitude_response(processor_system(*tanh_proc), 101);
  ASSERT_EQ(a.x.size(), 101u);
  EXPECT_EQ(a.x.front(), -1.0);
  EXPECT_EQ(a.x.back(), 1.0);
  for (std::size_t i = 0; i < a.x.size(); ++i) EXPECT_NEAR(a.y[i], a.reference[i], 1e-15);
  auto rat = dsp::make_processor<double>({.kind = "static_rational"}, 48000, rng, "r");
  const auto b = amplitude_response(processor_system(*rat), 201);
  for (std::size_t i = 0; i < b.x.size(); ++i) EXPECT_NEAR(b.y[i], b.reference[i], 1e-3);
  auto gain = dsp::make_processor<double>({.kind = "gain"}, 48000, rng, "g");
  EXPECT_THROW(processor_system(*gain), InvalidArgument);
}

TEST(TimeTrace, DynamicOffsetSeries) {
  auto m = graybox("O.dc", 1);
  std::vector<double> burst(1000, 0.0);
  for (std::size_t i = 200; i < 500; ++i) burst[i] = 0.8 * std::sin(0.05 * i);
  const auto t = time_trace(gb(m), 0, burst, {0.3});
  EXPECT_EQ(t.input.size(), burst.size());
  EXPECT_EQ(t.output.size(), burst.size());
  ASSERT_EQ(t.values.size(), 1u);
  EXPECT_EQ(t.values[0].size(), burst.size());
  // output = input + offset
  for (std::size_t i = 0; i < burst.size(); ++i) EXPECT_NEAR(t.output[i], burst[i] + t.values[0][i], 1e-12);
}

TEST(TimeTrace, SilenceSettles) {
  auto m = graybox("O.d");
  const auto t = time_trace(gb(m), 0, std::vector<double>(64 * 200, 0.0), {});
  const auto& v = t.values[0];
  double lo = v[v.size() / 2], hi = lo;
  for (std::size_t i = v.size() / 2; i < v.size(); ++i) lo = std::min(lo, v[i]), hi = std::max(hi, v[i]);
  EXPECT_LT(hi - lo, 1e-6);
}

TEST(TimeTrace, StaticStageRejected) {
  auto m = graybox("O.s");
  EXPECT_THROW(time_trace(gb(m), 0, std::vector<double>(100, 0.0), {}), InvalidArgument);
  EXPECT_THROW(time_trace(gb(m), 3, std::vector<double>(100, 0.0), {}), InvalidArgument);
}

TEST(StageParameters, GainReportsDecibels) {
  auto m = graybox("G.s > LP.s > TANH");
  gb(m).set_static_physical(0, {-7.5});
  gb(m).set_static_physical(1, {1500.0, 0.9});
  const auto g = stage_parameters(gb(m), 0, {});
  ASSERT_EQ(g.size(), 1u);
  EXPECT_NEAR(g[0].second, -7.5, 1e-9);
  const auto lp = stage_parameters(gb(m), 1, {});
  ASSERT_EQ(lp.size(), 2u);
  EXPECT_NEAR(lp[0].second, 1500.0, 1e-6);
  EXPECT_NEAR(lp[1].second, 0.9, 1e-9);
  EXPECT_TRUE(stage_parameters(gb(m), 2, {}).empty());
  auto d = graybox("G.d");
  EXPECT_THROW(stage_parameters(gb(d), 0, {}), InvalidArgument);
}

TEST(PlotData, CsvRoundTripAndSvg) {
  ResponseCurve c;
  for (int i = 0; i < 7; ++i) {
    c.freqs.push_back(10.0 * std::pow(3.0, i));
    c.magnitude_db.push_back(-0.1234567891234 * i);
    c.phase_rad.push_back(std::sin(i) / 3.0);
  }
  const auto csv = temp("curve.csv"), svg = temp("curve.svg");
  write_csv(c, csv);
  std::ifstream in(csv);
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, c.freqs.size() + 1);
  const auto back = read_response_csv(csv);
  for (std::size_t i = 0; i < c.freqs.size(); ++i) {
    EXPECT_NEAR(back.freqs[i], c.freqs[i], 1e-9);
    EXPECT_NEAR(back.magnitude_db[i], c.magnitude_db[i], 1e-9);
    EXPECT_NEAR(back.phase_rad[i], c.phase_rad[i], 1e-9);
  }
  write_svg(c, svg, "response <test> & co");
  std::stringstream doc;
  doc << std::ifstream(svg).rdbuf();
  EXPECT_TRUE(well_formed_xml(doc.str()));
  EXPECT_NE(doc.str().find("width=\"800\" height=\"480\""), std::string::npos);

  TimeTrace t{.fs = 100, .input = {0, 1, 2}, .output = {1, 2, 3}, .names = {"p"}, .values = {{5, 5, 6}}};
  write_csv(t, csv);
  std::ifstream tin(csv);
  std::string header;
  std::getline(tin, header);
  EXPECT_EQ(header, "time_s,input,output,p");
  write_svg(t, svg, "trace");
  std::stringstream tdoc;
  tdoc << std::ifstream(svg).rdbuf();
  EXPECT_TRUE(well_formed_xml(tdoc.str()));
  EXPECT_FALSE(well_formed_xml("<svg><g></svg>"));
  EXPECT_THROW(write_csv(c, fs::path("/nonexistent/dir/x.csv")), IoError);
  fs::remove(csv);
  fs::remove(svg);
}

}  // namespace
}  // namespace deffx::analysis
