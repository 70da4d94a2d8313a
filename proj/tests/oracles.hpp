#pragma once

// Slow, obviously-correct reference implementations the tests compare against.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <set>
#include <vector>

#include "szgan/eval.hpp"
#include "szgan/layers.hpp"
#include "szgan/network.hpp"

namespace oracle {

using szgan::Index;
using szgan::Tensor;

inline Index same_pad_before(Index in, Index k, Index s) {
  const Index out = (in + s - 1) / s;
  const Index total = std::max<Index>((out - 1) * s + k - in, 0);
  return total / 2;
}

// Direct nested-loop strided correlation with same-halving zero padding.
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, szgan::Extent2 stride) {
  const Index ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const Index co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const Index oh = (h + stride.h - 1) / stride.h, ow = (wd + stride.w - 1) / stride.w;
  const Index pt = same_pad_before(h, kh, stride.h), pl = same_pad_before(wd, kw, stride.w);
  Tensor y({co, oh, ow});
  for (Index o = 0; o < co; ++o)
    for (Index r = 0; r < oh; ++r)
      for (Index c = 0; c < ow; ++c) {
        double acc = b[o];
        for (Index i = 0; i < ci; ++i)
          for (Index u = 0; u < kh; ++u)
            for (Index v = 0; v < kw; ++v) {
              const Index yy = r * stride.h + u - pt, xx = c * stride.w + v - pl;
              if (yy < 0 || yy >= h || xx < 0 || xx >= wd) continue;
              acc += w.at({o, i, u, v}) * x.at({i, yy, xx});
            }
        y.at({o, r, c}) = acc;
      }
  return y;
}

// Transposed convolution as the explicit transpose of the convolution matrix on the mirrored
// geometry: the convolution maps [C_out, H*s, W*s] -> [C_in, H, W] with weights [C_in, C_out, kh, kw].
inline Tensor deconv2d(const Tensor& x, const Tensor& w, const Tensor& b, szgan::Extent2 stride) {
  const Index ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const Index co = w.dim(1);
  const Index bh = h * stride.h, bw = wd * stride.w;
  const Index big = co * bh * bw;
  Tensor zero_bias({ci});
  Tensor y({co, bh, bw});
  for (Index j = 0; j < big; ++j) {
    Tensor e({co, bh, bw});
    e[j] = 1.0;
    const Tensor col = conv2d(e, w, zero_bias, stride);
    double acc = 0.0;
    for (Index i = 0; i < col.size(); ++i) acc += col[i] * x[i];
    y[j] = acc + b[j / (bh * bw)];
  }
  return y;
}

// Cosine-windowed DFT of every frame, computed term by term, with one hop of tail padding.
inline std::vector<std::vector<std::complex<double>>> stft(const std::vector<double>& signal, Index len, Index hop) {
  std::vector<double> padded = signal;
  padded.resize(signal.size() + std::size_t(hop), 0.0);
  const Index frames = (Index(padded.size()) - len) / hop + 1;
  std::vector<std::vector<std::complex<double>>> out(static_cast<std::size_t>(frames));
  for (Index f = 0; f < frames; ++f) {
    auto& row = out[std::size_t(f)];
    row.resize(std::size_t(len / 2 + 1));
    for (Index k = 0; k <= len / 2; ++k) {
      std::complex<double> acc = 0.0;
      for (Index n = 0; n < len; ++n) {
        const double win = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * double(n) / double(len - 1)));
        const double angle = -2.0 * std::numbers::pi * double(k) * double(n) / double(len);
        acc += win * padded[std::size_t(f * hop + n)] * std::complex<double>(std::cos(angle), std::sin(angle));
      }
      row[std::size_t(k)] = acc;
    }
  }
  return out;
}

// Fraction of (positive, negative) pairs ranked correctly, ties counting one half.
inline double pair_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::uint64_t twice_wins = 0, n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? n_pos : n_neg) += 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j]) twice_wins += 2;
      else if (scores[i] == scores[j]) twice_wins += 1;
    }
  }
  return double(twice_wins) / (2.0 * double(n_pos) * double(n_neg));
}

struct AlarmCheck {
  std::vector<double> raises;
  std::vector<bool> correct;
  int predicted = 0;
  int false_alarms = 0;
  double scored_s = 0.0;
};

// Integer-second timelines only: coverage is counted second by second.
inline AlarmCheck alarms(const std::vector<szgan::TimedScore>& timeline, double threshold, double sph_s,
                         double sop_s, const std::vector<double>& onsets, long window_s) {
  AlarmCheck out;
  for (std::size_t i = 0; i < timeline.size(); ++i) {
    if (timeline[i].score < threshold) continue;
    bool covered = false;
    for (double r : out.raises) {
      if (timeline[i].time_s >= r && timeline[i].time_s < r + sph_s + sop_s) covered = true;
    }
    if (!covered) out.raises.push_back(timeline[i].time_s);
  }
  std::set<double> hit;
  for (double r : out.raises) {
    bool ok = false;
    for (double onset : onsets) {
      if (onset - r >= sph_s && onset - r < sph_s + sop_s) {
        ok = true;
        hit.insert(onset);
      }
    }
    out.correct.push_back(ok);
    if (!ok) ++out.false_alarms;
  }
  out.predicted = int(hit.size());
  std::set<long> seconds;
  for (const auto& p : timeline) {
    for (long t = long(p.time_s); t < long(p.time_s) + window_s; ++t) seconds.insert(t);
  }
  out.scored_s = double(seconds.size());
  return out;
}

// Groups of seizures connected by onset gaps below the threshold, found by pairwise scan.
inline std::vector<std::vector<std::size_t>> merge_groups(const std::vector<double>& onsets, double threshold_s) {
  std::vector<std::size_t> parent(onsets.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    return parent[i] == i ? i : parent[i] = find(parent[i]);
  };
  for (std::size_t i = 0; i < onsets.size(); ++i)
    for (std::size_t j = i + 1; j < onsets.size(); ++j) {
      bool chained = true;
      for (std::size_t k = i + 1; k <= j; ++k) chained = chained && onsets[k] - onsets[k - 1] < threshold_s;
      if (chained) parent[find(j)] = find(i);
    }
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < onsets.size(); ++i) {
    if (find(i) == i) groups.push_back({});
    groups.back().push_back(i);
  }
  return groups;
}

// Central differences of a scalar function of one value slot.
inline double central_difference(double& slot, const std::function<double()>& f, double h = 1e-5) {
  const double keep = slot;
  slot = keep + h;
  const double up = f();
  slot = keep - h;
  const double down = f();
  slot = keep;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

}  // namespace oracle
