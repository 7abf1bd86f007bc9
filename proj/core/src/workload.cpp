#include "leaftl/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace leaftl {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_u64(std::string_view s, std::uint64_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::optional<TraceEvent> parse_line(std::string_view line, std::string& error) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t comma = line.find(',', pos);
    fields.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (fields.size() != 7) {
    error = "expected 7 fields, found " + std::to_string(fields.size());
    return std::nullopt;
  }
  TraceEvent e;
  std::uint64_t ticks = 0;
  if (!parse_u64(fields[0], ticks)) {
    error = "bad timestamp";
    return std::nullopt;
  }
  e.timestamp_ns = ticks * 100;
  const auto type = trim(fields[3]);
  if (iequals(type, "read")) {
    e.op = OpType::Read;
  } else if (iequals(type, "write")) {
    e.op = OpType::Write;
  } else {
    error = "unknown request type '" + std::string(type) + "'";
    return std::nullopt;
  }
  if (!parse_u64(fields[4], e.offset)) {
    error = "bad offset";
    return std::nullopt;
  }
  if (!parse_u64(fields[5], e.size)) {
    error = "bad size";
    return std::nullopt;
  }
  if (e.size == 0) {
    error = "zero-length request";
    return std::nullopt;
  }
  return e;
}

// 64-bit Mersenne Twister with a portable [0,1) mapping, so
// generated traces do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x < limit) return x % n;
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace

ParseResult parse_msr(std::istream& in, bool strict) {
  ParseResult result;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto view = trim(line);
    if (view.empty()) continue;
    std::string error;
    if (auto e = parse_line(view, error)) {
      result.events.push_back(*e);
    } else if (strict) {
      throw TraceParseError(number, error);
    } else {
      result.issues.push_back({number, error});
    }
  }
  if (in.bad()) {
    throw std::runtime_error("error while reading trace stream");
  }
  return result;
}

ParseResult parse_msr_file(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open trace file '" + path + "'");
  }
  return parse_msr(in, strict);
}

void write_msr(std::ostream& out, std::span<const TraceEvent> events) {
  for (const auto& e : events) {
    out << e.timestamp_ns / 100 << ",host,0," << (e.op == OpType::Read ? "Read" : "Write") << ','
        << e.offset << ',' << e.size << ",0\n";
  }
}

void parse_synth_kind(std::string_view text, SynthSpec& spec) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const std::string arg = colon == std::string_view::npos ? std::string() : std::string(text.substr(colon + 1));
  auto number = [&](double& out) {
    if (arg.empty()) return;
    std::size_t used = 0;
    try {
      out = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != arg.size()) {
      throw std::invalid_argument("bad parameter '" + arg + "' for workload " + std::string(name));
    }
  };
  if (iequals(name, "sequential")) {
    spec.kind = SynthKind::Sequential;
  } else if (iequals(name, "random")) {
    spec.kind = SynthKind::Random;
  } else if (iequals(name, "strided")) {
    spec.kind = SynthKind::Strided;
    if (!arg.empty() && !parse_u64(arg, spec.stride)) {
      throw std::invalid_argument("bad stride '" + arg + "'");
    }
  } else if (iequals(name, "zipf")) {
    spec.kind = SynthKind::Zipf;
    number(spec.theta);
  } else if (iequals(name, "mixed")) {
    spec.kind = SynthKind::Mixed;
    number(spec.sequential_ratio);
  } else {
    throw std::invalid_argument("unknown synthetic workload '" + std::string(text) + "'");
  }
}

std::string describe(const SynthSpec& spec) {
  std::ostringstream os;
  switch (spec.kind) {
    case SynthKind::Sequential:
      os << "sequential";
      break;
    case SynthKind::Random:
      os << "random";
      break;
    case SynthKind::Strided:
      os << "strided:" << spec.stride;
      break;
    case SynthKind::Zipf:
      os << "zipf:" << spec.theta;
      break;
    case SynthKind::Mixed:
      os << "mixed:" << spec.sequential_ratio;
      break;
  }
  return os.str();
}

std::vector<TraceEvent> synth(const SynthSpec& spec) {
  if (spec.pages == 0) throw std::invalid_argument("synth: empty address space");
  if (spec.pages > (1ULL << 32)) throw std::invalid_argument("synth: address space too large");
  if (spec.page_size == 0) throw std::invalid_argument("synth: page_size must be positive");
  if (spec.kind == SynthKind::Strided && spec.stride == 0) {
    throw std::invalid_argument("synth: stride must be positive");
  }
  if (spec.kind == SynthKind::Zipf && !(spec.theta > 0.0)) {
    throw std::invalid_argument("synth: zipf theta must be positive");
  }
  if (!(spec.sequential_ratio >= 0.0 && spec.sequential_ratio <= 1.0)) {
    throw std::invalid_argument("synth: mixed ratio must be in [0, 1]");
  }
  if (!(spec.read_ratio >= 0.0 && spec.read_ratio <= 1.0)) {
    throw std::invalid_argument("synth: read ratio must be in [0, 1]");
  }

  Rng rng(spec.seed);
  std::optional<ZipfSampler> zipf;
  if (spec.kind == SynthKind::Zipf) zipf.emplace(spec.pages, spec.theta);

  std::vector<TraceEvent> events;
  events.reserve(spec.count);
  // Reads and writes advance separate cursors, so each stream keeps the
  // pattern on its own.
  std::uint64_t position[2] = {0, 0};
  std::uint64_t cursor[2] = {0, 0};
  for (std::uint64_t i = 0; i < spec.count; ++i) {
    const bool read = spec.read_ratio > 0.0 && rng.uniform() < spec.read_ratio;
    const std::uint64_t n = position[read]++;
    std::uint64_t page = 0;
    switch (spec.kind) {
      case SynthKind::Sequential:
        page = n % spec.pages;
        break;
      case SynthKind::Random:
        page = rng.below(spec.pages);
        break;
      case SynthKind::Strided:
        page = ((n % spec.pages) * (spec.stride % spec.pages)) % spec.pages;
        break;
      case SynthKind::Zipf:
        page = (*zipf)([&] { return rng.uniform(); }) - 1;
        break;
      case SynthKind::Mixed:
        if (rng.uniform() < spec.sequential_ratio) {
          page = cursor[read];
          cursor[read] = (cursor[read] + 1) % spec.pages;
        } else {
          page = rng.below(spec.pages);
        }
        break;
    }
    TraceEvent e;
    e.timestamp_ns = i * 1000;
    e.offset = page * spec.page_size;
    e.size = spec.page_size;
    e.op = read ? OpType::Read : OpType::Write;
    events.push_back(e);
  }
  return events;
}

std::vector<TraceEvent> scale_to_capacity(std::span<const TraceEvent> events,
                                          std::uint64_t capacity_bytes, std::uint32_t page_size) {
  if (page_size == 0 || capacity_bytes < page_size) {
    throw std::invalid_argument("scale_to_capacity: capacity smaller than a page");
  }
  std::vector<TraceEvent> out;
  out.reserve(events.size());
  for (auto e : events) {
    e.offset = (e.offset % capacity_bytes) / page_size * page_size;
    e.size = std::min(e.size, capacity_bytes - e.offset);
    out.push_back(e);
  }
  return out;
}

PageRange split_pages(const TraceEvent& event, std::uint32_t page_size) {
  if (event.size == 0) return {};
  const std::uint64_t first = event.offset / page_size;
  const std::uint64_t last = (event.offset + event.size - 1) / page_size;
  return PageRange{static_cast<Lpa>(first), static_cast<std::uint32_t>(last - first + 1)};
}

// ---- Zipf -------------------------------------------------------------------

namespace {

double helper1(double x) {
  return std::abs(x) > 1e-8 ? std::log1p(x) / x : 1.0 - x * (0.5 - x * (1.0 / 3.0 - 0.25 * x));
}

double helper2(double x) {
  return std::abs(x) > 1e-8 ? std::expm1(x) / x : 1.0 + x * 0.5 * (1.0 + x / 3.0 * (1.0 + 0.25 * x));
}

}  // namespace

ZipfSampler::ZipfSampler(std::uint64_t n, double theta) : n_(n), theta_(theta) {
  if (n == 0 || !(theta > 0.0)) throw std::invalid_argument("ZipfSampler: bad parameters");
  h_integral_x1_ = h_integral(1.5) - 1.0;
  h_integral_n_ = h_integral(static_cast<double>(n) + 0.5);
  s_ = 2.0 - h_integral_inverse(h_integral(2.5) - h(2.0));
}

double ZipfSampler::h(double x) const { return std::exp(-theta_ * std::log(x)); }

double ZipfSampler::h_integral(double x) const {
  const double log_x = std::log(x);
  return helper2((1.0 - theta_) * log_x) * log_x;
}

double ZipfSampler::h_integral_inverse(double x) const {
  double t = x * (1.0 - theta_);
  if (t < -1.0) t = -1.0;
  return std::exp(helper1(t) * x);
}

}  // namespace leaftl
