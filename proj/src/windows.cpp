#include "slowdown/windows.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

#include "binary_io.hpp"
#include "slowdown/error.hpp"
#include "slowdown/random.hpp"

namespace slowdown {

namespace {

constexpr std::string_view kCacheMagic{"SDWINDS\0", 8};
constexpr std::uint32_t kCacheVersion = 1;
constexpr std::uint64_t kBalanceStream = 0x62616c616e6365ULL;
constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;

}  // namespace

WindowSample::WindowSample(std::shared_ptr<const std::vector<double>> storage, std::size_t offset,
                           WindowLabel label, std::string segment_id, Minute window_start)
    : storage_(std::move(storage)),
      offset_(offset),
      label_(label),
      segment_id_(std::move(segment_id)),
      window_start_(window_start) {
  if (!storage_ || offset_ > storage_->size() || storage_->size() - offset_ < kWindowLength) {
    fail(ErrorCode::kOutOfRange, "window sample exceeds its storage");
  }
}

WindowLabel label_window(Minute window_start, std::span<const SlowdownEvent> events) {
  const Minute window_end = window_start + static_cast<Minute>(kWindowLength);
  auto it = std::lower_bound(events.begin(), events.end(), window_start,
                             [](const SlowdownEvent& ev, Minute t) { return ev.start_min < t; });
  for (; it != events.end() && it->start_min < window_end; ++it) {
    if (it->end_min <= window_end) {
      const double len = static_cast<double>(kWindowLength);
      return WindowLabel{WindowClass::kSdIncluded,
                         static_cast<double>(it->start_min - window_start) / len,
                         static_cast<double>(it->end_min - window_start) / len};
    }
  }
  return WindowLabel{};
}

std::vector<WindowSample> extract_training_windows(const LabeledCorpus& corpus,
                                                   const NormalizationSpec& spec) {
  spec.check();
  std::vector<WindowSample> out;
  for (const auto& series : corpus.series) {
    if (series.size() < kWindowLength) continue;
    // gap_mask survives fill_gaps for audit, so only non-finite values reject.
    if (std::any_of(series.speeds.begin(), series.speeds.end(),
                    [](double v) { return !std::isfinite(v); })) {
      fail(ErrorCode::kInvalidArgument, "segment '" + series.segment_id + "' is not gap-filled");
    }
    auto storage = std::make_shared<const std::vector<double>>(normalize(series.speeds, spec));
    const auto& events = corpus.events_for(series.segment_id);
    const std::size_t count = series.size() - kWindowLength + 1;
    out.reserve(out.size() + count);
    for (std::size_t s = 0; s < count; ++s) {
      const Minute start = series.t0 + static_cast<Minute>(s);
      out.emplace_back(storage, s, label_window(start, events), series.segment_id, start);
    }
  }
  return out;
}

std::vector<WindowSample> balance_dataset(const std::vector<WindowSample>& samples,
                                          double ratio_tolerance, std::uint64_t seed) {
  if (!(ratio_tolerance >= 0.0)) fail(ErrorCode::kInvalidArgument, "ratio_tolerance must be >= 0");
  std::vector<std::size_t> negatives;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].positive()) {
      ++n_pos;
    } else {
      negatives.push_back(i);
    }
  }
  if (n_pos == 0 || negatives.empty()) {
    fail(ErrorCode::kClassMissing, "balancing needs both classes (positives " +
                                       std::to_string(n_pos) + ", negatives " +
                                       std::to_string(negatives.size()) + ")");
  }
  const std::size_t keep = std::min(negatives.size(), n_pos);
  Rng rng(derive_seed(seed, kBalanceStream));
  // Partial Fisher-Yates: the first `keep` slots become a uniform subset.
  for (std::size_t i = 0; i < keep; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(negatives.size() - 1)));
    std::swap(negatives[i], negatives[j]);
  }
  std::vector<std::uint8_t> chosen(samples.size(), 0);
  for (std::size_t i = 0; i < keep; ++i) chosen[negatives[i]] = 1;

  std::vector<WindowSample> out;
  out.reserve(n_pos + keep);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].positive() || chosen[i]) out.push_back(samples[i]);
  }
  return out;
}

DatasetSplit split_train_val(const std::vector<WindowSample>& samples, double fraction,
                             std::uint64_t seed) {
  if (samples.size() < 5) {
    fail(ErrorCode::kTooFewSamples, "need at least 5 samples to split, got " +
                                        std::to_string(samples.size()));
  }
  if (!(fraction > 0.0 && fraction < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "split fraction must be in (0, 1)");
  }
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    by_class[samples[i].positive() ? 0 : 1].push_back(i);
  }

  // Largest-remainder allocation keeps |train| = round(fraction * n).
  const auto total_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(samples.size())));
  std::size_t take[2];
  double remainder[2];
  for (int c = 0; c < 2; ++c) {
    const double exact = fraction * static_cast<double>(by_class[c].size());
    take[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
  }
  while (take[0] + take[1] < total_train) {
    const int c = (remainder[0] >= remainder[1] && take[0] < by_class[0].size()) ||
                          take[1] >= by_class[1].size()
                      ? 0
                      : 1;
    ++take[c];
    remainder[c] = -1.0;
  }

  Rng rng(derive_seed(seed, kSplitStream));
  DatasetSplit split;
  split.split_seed = seed;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  for (int c = 0; c < 2; ++c) {
    auto& idx = by_class[c];
    rng.shuffle(std::span<std::size_t>(idx));
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]));
    val_idx.insert(val_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]), idx.end());
  }
  rng.shuffle(std::span<std::size_t>(train_idx));
  rng.shuffle(std::span<std::size_t>(val_idx));
  split.train.reserve(train_idx.size());
  split.val.reserve(val_idx.size());
  for (auto i : train_idx) split.train.push_back(samples[i]);
  for (auto i : val_idx) split.val.push_back(samples[i]);
  return split;
}

std::vector<WindowSample> positives_only(const std::vector<WindowSample>& samples) {
  std::vector<WindowSample> out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out),
               [](const WindowSample& s) { return s.positive(); });
  return out;
}

void save_dataset_cache(const std::vector<WindowSample>& samples, const NormalizationSpec& spec,
                        const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.bytes(kCacheMagic);
  w.u32(kCacheVersion);
  w.u32(static_cast<std::uint32_t>(kWindowLength));
  w.f64(spec.v_max);
  w.u64(samples.size());
  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (const auto& s : samples) {
    for (double x : s.features()) w.f32(static_cast<float>(x));
    w.u8(static_cast<std::uint8_t>(s.label().label));
    w.f32(s.label().start_target ? static_cast<float>(*s.label().start_target) : nan);
    w.f32(s.label().end_target ? static_cast<float>(*s.label().end_target) : nan);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) fail(ErrorCode::kIo, "cannot write dataset cache '" + path.string() + "'");
}

std::vector<WindowSample> load_dataset_cache(const std::filesystem::path& path,
                                             const NormalizationSpec& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open dataset cache '" + path.string() + "'");
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::ByteReader r(data);
  auto corrupt = [&](const std::string& why) {
    fail(ErrorCode::kCorruptDataset, "'" + path.string() + "': " + why);
  };

  std::string_view magic;
  std::uint32_t version = 0;
  std::uint32_t window = 0;
  double v_max = 0.0;
  std::uint64_t count = 0;
  if (!r.bytes(kCacheMagic.size(), magic) || magic != kCacheMagic) corrupt("bad magic");
  if (!r.u32(version) || version != kCacheVersion) corrupt("unsupported version");
  if (!r.u32(window) || window != kWindowLength) corrupt("window length mismatch");
  if (!r.f64(v_max) || v_max != expected.v_max) corrupt("normalization v_max mismatch");
  if (!r.u64(count)) corrupt("truncated header");
  const std::size_t record = kWindowLength * 4 + 1 + 8;
  if (r.remaining() != count * record) corrupt("payload size does not match sample count");

  std::vector<WindowSample> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto features = std::make_shared<std::vector<double>>(kWindowLength);
    for (auto& x : *features) {
      float f = 0.0F;
      r.f32(f);
      x = f;
    }
    std::uint8_t cls = 0;
    float start = 0.0F;
    float end = 0.0F;
    r.u8(cls);
    r.f32(start);
    r.f32(end);
    if (cls > 1) corrupt("bad class byte");
    WindowLabel label;
    label.label = static_cast<WindowClass>(cls);
    if (label.positive()) {
      if (std::isnan(start) || std::isnan(end)) corrupt("positive sample without targets");
      label.start_target = start;
      label.end_target = end;
    }
    out.emplace_back(std::move(features), 0, label, std::string{}, static_cast<Minute>(i));
  }
  return out;
}

}  // namespace slowdown
