#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "petprior/eval/metrics.hpp"
#include "petprior/png_io.hpp"

namespace petprior::eval {
namespace {

std::optional<double> mean(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string cell(const std::optional<double>& v) {
  if (!v) return {};
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

std::optional<double> parse_cell(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    fail(ErrorCode::kCorruptHeader, "bad numeric cell '" + s + "'");
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

// 5x7 glyphs for the handful of characters the plot needs.
const std::map<char, std::array<const char*, 7>>& font() {
  static const std::map<char, std::array<const char*, 7>> glyphs = {
      {'A', {"01110", "10001", "10001", "11111", "10001", "10001", "10001"}},
      {'C', {"01111", "10000", "10000", "10000", "10000", "10000", "01111"}},
      {'D', {"11110", "10001", "10001", "10001", "10001", "10001", "11110"}},
      {'E', {"11111", "10000", "10000", "11110", "10000", "10000", "11111"}},
      {'G', {"01111", "10000", "10000", "10011", "10001", "10001", "01111"}},
      {'H', {"10001", "10001", "10001", "11111", "10001", "10001", "10001"}},
      {'I', {"11111", "00100", "00100", "00100", "00100", "00100", "11111"}},
      {'L', {"10000", "10000", "10000", "10000", "10000", "10000", "11111"}},
      {'M', {"10001", "11011", "10101", "10101", "10001", "10001", "10001"}},
      {'N', {"10001", "11001", "10101", "10011", "10001", "10001", "10001"}},
      {'O', {"01110", "10001", "10001", "10001", "10001", "10001", "01110"}},
      {'P', {"11110", "10001", "10001", "11110", "10000", "10000", "10000"}},
      {'U', {"10001", "10001", "10001", "10001", "10001", "10001", "01110"}},
      {'Y', {"10001", "10001", "01010", "00100", "00100", "00100", "00100"}},
      {'0', {"01110", "10001", "10011", "10101", "11001", "10001", "01110"}},
      {'1', {"00100", "01100", "00100", "00100", "00100", "00100", "01110"}},
      {'5', {"11111", "10000", "11110", "00001", "00001", "10001", "01110"}},
      {'.', {"00000", "00000", "00000", "00000", "00000", "01100", "01100"}},
  };
  return glyphs;
}

void draw_text(RgbRaster& img, int x, int y, const std::string& text) {
  for (char ch : text) {
    const auto it = font().find(ch);
    if (it != font().end()) {
      for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 5; ++c)
          if (it->second[static_cast<std::size_t>(r)][c] == '1') img.set(x + c, y + r, 0, 0, 0);
    }
    x += 6;
  }
}

void hline(RgbRaster& img, int x0, int x1, int y, std::uint8_t v = 0) {
  for (int x = x0; x <= x1; ++x) img.set(x, y, v, v, v);
}
void vline(RgbRaster& img, int x, int y0, int y1, std::uint8_t v = 0) {
  for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) img.set(x, y, v, v, v);
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string plot_label(TumorClass c) {
  switch (c) {
    case TumorClass::kLungCancer: return "LUNG";
    case TumorClass::kLymphoma: return "LYMPHOMA";
    case TumorClass::kMelanoma: return "MELANOMA";
    case TumorClass::kNegative: return "NEG";
  }
  return {};
}

}  // namespace

std::string_view to_string(ReportGroup group) {
  switch (group) {
    case ReportGroup::kGlobal: return "Global";
    case ReportGroup::kPositive: return "Positive";
    case ReportGroup::kNegative: return "Negative";
    case ReportGroup::kLungCancer: return "Lung Cancer";
    case ReportGroup::kLymphoma: return "Lymphoma";
    case ReportGroup::kMelanoma: return "Melanoma";
  }
  return {};
}

ClasswiseReport aggregate(const std::vector<EvalRecord>& records, VolumeMode mode) {
  require(!records.empty(), ErrorCode::kEmptyInput, "cannot aggregate an empty record list");
  ClasswiseReport report;
  report.mode = mode;
  auto fill = [&](ReportGroup g, auto member_of, bool with_overlap) {
    std::vector<double> dice, fpv, fnv;
    GroupStats& s = report.groups[static_cast<std::size_t>(g)];
    for (const auto& r : records) {
      if (!member_of(r)) continue;
      ++s.cases;
      fpv.push_back(r.fpv_liters);
      if (r.dice) dice.push_back(*r.dice);
      if (r.fnv_liters) fnv.push_back(*r.fnv_liters);
    }
    s.fpv_liters = mean(fpv);
    if (with_overlap) {
      s.dice = mean(dice);
      s.fnv_liters = mean(fnv);
    }
  };
  fill(ReportGroup::kGlobal, [](const EvalRecord&) { return true; }, false);
  fill(ReportGroup::kPositive, [](const EvalRecord& r) { return r.tumor_class != TumorClass::kNegative; }, true);
  fill(ReportGroup::kNegative, [](const EvalRecord& r) { return r.tumor_class == TumorClass::kNegative; }, false);
  fill(ReportGroup::kLungCancer, [](const EvalRecord& r) { return r.tumor_class == TumorClass::kLungCancer; }, true);
  fill(ReportGroup::kLymphoma, [](const EvalRecord& r) { return r.tumor_class == TumorClass::kLymphoma; }, true);
  fill(ReportGroup::kMelanoma, [](const EvalRecord& r) { return r.tumor_class == TumorClass::kMelanoma; }, true);
  return report;
}

void write_report_csv(const ClasswiseReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "metric";
  for (auto g : kReportGroups) out << ',' << to_string(g);
  out << '\n';
  const std::string mode(to_string(report.mode));
  const std::pair<std::string, std::optional<double> GroupStats::*> rows[] = {
      {"Dice", &GroupStats::dice},
      {"FPV_liters_" + mode, &GroupStats::fpv_liters},
      {"FNV_liters_" + mode, &GroupStats::fnv_liters}};
  for (const auto& [name, member] : rows) {
    out << name;
    for (const auto& s : report.groups) out << ',' << cell(s.*member);
    out << '\n';
  }
  require(out.good(), ErrorCode::kIo, "write failed for " + path.string());
}

ClasswiseReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kMissingFile, "report not found: " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  require(header.size() == 7 && header[0] == "metric", ErrorCode::kCorruptHeader, "unexpected report header");
  ClasswiseReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    require(f.size() == 7, ErrorCode::kCorruptHeader, "report row must have 7 fields: " + line);
    std::optional<double> GroupStats::*member = nullptr;
    if (f[0] == "Dice") {
      member = &GroupStats::dice;
    } else if (f[0].rfind("FPV_liters_", 0) == 0) {
      member = &GroupStats::fpv_liters;
      report.mode = volume_mode_from_string(f[0].substr(11));
    } else if (f[0].rfind("FNV_liters_", 0) == 0) {
      member = &GroupStats::fnv_liters;
    } else {
      fail(ErrorCode::kCorruptHeader, "unknown report row " + f[0]);
    }
    for (std::size_t i = 0; i < 6; ++i) report.groups[i].*member = parse_cell(f[i + 1]);
  }
  return report;
}

void write_records_csv(const std::vector<EvalRecord>& records, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "case_id,tumor_class,fold,split,dice,fpv_liters,fnv_liters\n";
  for (const auto& r : records) {
    out << r.case_id << ',' << to_string(r.tumor_class) << ',' << r.fold << ',' << r.split << ',' << cell(r.dice)
        << ',' << cell(r.fpv_liters) << ',' << cell(r.fnv_liters) << '\n';
  }
  require(out.good(), ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<EvalRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kMissingFile, "records not found: " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<EvalRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    require(f.size() == 7, ErrorCode::kCorruptHeader, "records row must have 7 fields: " + line);
    EvalRecord r;
    r.case_id = f[0];
    r.tumor_class = tumor_class_from_string(f[1]);
    r.fold = std::stoi(f[2]);
    r.split = f[3];
    r.dice = parse_cell(f[4]);
    r.fpv_liters = parse_cell(f[5]).value_or(0.0);
    r.fnv_liters = parse_cell(f[6]);
    out.push_back(std::move(r));
  }
  return out;
}

PlotLayout write_dice_plot(const std::vector<EvalRecord>& records, const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::vector<double>>> groups;
  for (TumorClass c : kAllTumorClasses) {
    std::vector<double> v;
    for (const auto& r : records) {
      if (r.tumor_class == c && r.dice) v.push_back(*r.dice);
    }
    if (!v.empty()) groups.emplace_back(plot_label(c), std::move(v));
  }

  PlotLayout layout;
  constexpr int kLeft = 50, kTop = 30, kPlotH = 300, kGroupW = 110, kBottom = 40;
  layout.width = kLeft + kGroupW * std::max<int>(1, static_cast<int>(groups.size())) + 20;
  layout.height = kTop + kPlotH + kBottom;
  RgbRaster img(layout.width, layout.height);
  auto ypix = [&](double v) { return kTop + static_cast<int>(std::lround((1.0 - std::clamp(v, 0.0, 1.0)) * kPlotH)); };

  draw_text(img, kLeft, 10, "DICE");
  vline(img, kLeft, kTop, kTop + kPlotH);
  hline(img, kLeft, layout.width - 10, kTop + kPlotH);
  for (const auto& [v, label] : {std::pair{0.0, "0"}, {0.5, "0.5"}, {1.0, "1"}}) {
    hline(img, kLeft - 4, kLeft, ypix(v));
    hline(img, kLeft + 1, layout.width - 10, ypix(v), 225);
    draw_text(img, kLeft - 8 - 6 * static_cast<int>(std::string(label).size()), ypix(v) - 3, label);
  }

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& [label, values] = groups[gi];
    layout.group_labels.push_back(label);
    const int cx = kLeft + kGroupW * static_cast<int>(gi) + kGroupW / 2;
    const int half = 25;
    const int q1 = ypix(quantile(values, 0.25)), q3 = ypix(quantile(values, 0.75));
    const int med = ypix(quantile(values, 0.5));
    const int lo = ypix(*std::min_element(values.begin(), values.end()));
    const int hi = ypix(*std::max_element(values.begin(), values.end()));
    for (int y = q3; y <= q1; ++y) hline(img, cx - half, cx + half, y, 200);
    hline(img, cx - half, cx + half, q1);
    hline(img, cx - half, cx + half, q3);
    vline(img, cx - half, q3, q1);
    vline(img, cx + half, q3, q1);
    for (int t = -1; t <= 1; ++t) hline(img, cx - half, cx + half, med + t);
    vline(img, cx, hi, q3);
    vline(img, cx, q1, lo);
    hline(img, cx - 10, cx + 10, hi);
    hline(img, cx - 10, cx + 10, lo);
    for (double v : values) {
      for (int d = -1; d <= 1; ++d) {
        img.set(cx + half + 8 + d, ypix(v), 200, 30, 30);
        img.set(cx + half + 8, ypix(v) + d, 200, 30, 30);
      }
    }
    draw_text(img, cx - 3 * static_cast<int>(label.size()), kTop + kPlotH + 12, label);
  }
  write_png(img, path);
  return layout;
}

PlotLayout emit_report(const ClasswiseReport& report, const std::vector<EvalRecord>& records,
                       const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec && std::filesystem::is_directory(out_dir), ErrorCode::kIo,
          "cannot create report directory " + out_dir.string());
  write_report_csv(report, out_dir / "report.csv");
  write_records_csv(records, out_dir / "records.csv");
  return write_dice_plot(records, out_dir / "dice_distribution.png");
}

}  // namespace petprior::eval
