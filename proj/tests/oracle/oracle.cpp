#include "oracle.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

namespace {

Matrix weight(const itf::Parameter* p) { return to_matrix(p->value); }

std::vector<double> softmax(const std::vector<double>& x) {
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> e(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += e[i] = std::exp(x[i] - mx);
  for (auto& v : e) v /= total;
  return e;
}

}  // namespace

Matrix to_matrix(const itf::Array& a) {
  Matrix m(a.dim(0), std::vector<double>(a.dim(1)));
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) m[i][j] = a.at(i, j);
  return m;
}

Tensor3 to_tensor3(const itf::Array& a) {
  Tensor3 t(a.dim(0), Matrix(a.dim(1), std::vector<double>(a.dim(2))));
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j)
      for (std::size_t k = 0; k < a.dim(2); ++k) t[i][j][k] = a.at(i, j, k);
  return t;
}

itf::Array from_matrix(const Matrix& m) {
  itf::Array a({m.size(), m.empty() ? 0 : m[0].size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) a.at(i, j) = m[i][j];
  return a;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Matrix layer_norm(const Matrix& x, const itf::nn::LayerNorm& ln, double eps) {
  Matrix y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(x[i].size());
    double mean = 0.0;
    for (double v : x[i]) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x[i]) var += (v - mean) * (v - mean);
    var /= n;
    for (std::size_t j = 0; j < x[i].size(); ++j)
      y[i][j] = (x[i][j] - mean) / std::sqrt(var + eps) * ln.gamma->value[j] + ln.beta->value[j];
  }
  return y;
}

Matrix attention(const Matrix& query, const Matrix& memory, const itf::nn::MultiHeadAttention& mha, bool causal) {
  const Matrix q = matmul(query, weight(mha.wq.weight));
  const Matrix k = matmul(memory, weight(mha.wk.weight));
  const Matrix v = matmul(memory, weight(mha.wv.weight));
  const std::size_t d = q[0].size(), dk = d / mha.heads;
  Matrix merged(query.size(), std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < mha.heads; ++h)
    for (std::size_t i = 0; i < query.size(); ++i) {
      std::vector<double> scores(memory.size());
      for (std::size_t j = 0; j < memory.size(); ++j) {
        double s = 0.0;
        for (std::size_t c = h * dk; c < (h + 1) * dk; ++c) s += q[i][c] * k[j][c];
        scores[j] = causal && j > i ? -1e30 : s / std::sqrt(static_cast<double>(dk));
      }
      const auto w = softmax(scores);
      for (std::size_t j = 0; j < memory.size(); ++j)
        for (std::size_t c = h * dk; c < (h + 1) * dk; ++c) merged[i][c] += w[j] * v[j][c];
    }
  return matmul(merged, weight(mha.wo.weight));
}

Matrix refine_instruct(const itf::ItFormerLayer& layer, const Matrix& instruct, const Matrix& query) {
  Matrix x = instruct;
  x.insert(x.end(), query.begin(), query.end());
  const Matrix normed = layer_norm(x, layer.refine_norm);
  const Matrix attended = attention(normed, normed, layer.refine_attn, false);
  Matrix out(instruct.size());
  for (std::size_t i = 0; i < instruct.size(); ++i) {
    out[i] = x[i];
    for (std::size_t j = 0; j < out[i].size(); ++j) out[i][j] += attended[i][j];
  }
  return out;
}

Matrix channel_fuse(const itf::ItFormerLayer& layer, const Matrix& refined, const Tensor3& tokens) {
  const std::size_t n = refined.size(), L = tokens.size(), V = tokens[0].size(), d = tokens[0][0].size();
  const std::size_t heads = layer.channel_heads, dk = d / heads;
  const Matrix wq = weight(layer.channel_q.weight), wk = weight(layer.channel_k.weight),
               wv = weight(layer.channel_v.weight);
  const Matrix q = matmul(refined, wq);
  Tensor3 keys(L, Matrix(V)), values(L, Matrix(V));
  for (std::size_t l = 0; l < L; ++l) {
    keys[l] = matmul(tokens[l], wk);
    values[l] = matmul(tokens[l], wv);
  }
  Matrix pooled_keys(V, std::vector<double>(d, 0.0));
  for (std::size_t v = 0; v < V; ++v)
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t l = 0; l < L; ++l) pooled_keys[v][c] += keys[l][v][c];
      pooled_keys[v][c] /= static_cast<double>(L);
    }
  Matrix fused(L, std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    Matrix A(n);
    for (std::size_t qi = 0; qi < n; ++qi) {
      std::vector<double> scores(V);
      for (std::size_t v = 0; v < V; ++v) {
        double s = 0.0;
        for (std::size_t c = h * dk; c < (h + 1) * dk; ++c) s += q[qi][c] * pooled_keys[v][c];
        scores[v] = s / std::sqrt(static_cast<double>(dk));
      }
      A[qi] = softmax(scores);
    }
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t c = h * dk; c < (h + 1) * dk; ++c) {
        double acc = 0.0;
        for (std::size_t qi = 0; qi < n; ++qi)
          for (std::size_t v = 0; v < V; ++v) acc += A[qi][v] * values[l][v][c];
        fused[l][c] = acc / static_cast<double>(n);
      }
  }
  return matmul(fused, weight(layer.channel_out.weight));
}

Matrix time_attend(const itf::ItFormerLayer& layer, const Matrix& refined, const Matrix& channel) {
  return attention(refined, layer_norm(channel, layer.time_norm), layer.time_attn, false);
}

Matrix cross_attention(const itf::nn::MultiHeadAttention& mha, const Matrix& refined, const Tensor3& tokens) {
  Matrix flat;
  for (const auto& step : tokens)
    for (const auto& token : step) flat.push_back(token);
  return attention(refined, flat, mha, false);
}

std::vector<double> rotate(const std::vector<double>& row, double position, double base) {
  std::vector<double> out = row;
  const double d = static_cast<double>(row.size());
  for (std::size_t j = 0; 2 * j + 1 < row.size(); ++j) {
    const double angle = position * std::pow(base, -2.0 * static_cast<double>(j) / d);
    out[2 * j] = row[2 * j] * std::cos(angle) - row[2 * j + 1] * std::sin(angle);
    out[2 * j + 1] = row[2 * j] * std::sin(angle) + row[2 * j + 1] * std::cos(angle);
  }
  return out;
}

std::vector<std::size_t> window_starts(std::size_t length, std::size_t patch, std::size_t stride) {
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + patch <= length; s += stride) starts.push_back(s);
  return starts;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  if (a.size() != b.size()) return INFINITY;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return INFINITY;
    for (std::size_t j = 0; j < a[i].size(); ++j) worst = std::max(worst, std::abs(a[i][j] - b[i][j]));
  }
  return worst;
}

GradientCheck finite_difference(const std::function<double()>& loss, itf::Array& value, const itf::Array& analytic,
                                double step) {
  GradientCheck r;
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double saved = value[i];
    value[i] = saved + step;
    const double up = loss();
    value[i] = saved - step;
    const double down = loss();
    value[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.empty() ? 0.0 : analytic[i];
    diff2 += (a - numeric) * (a - numeric);
    a2 += a * a;
    n2 += numeric * numeric;
  }
  r.entries = value.size();
  r.analytic_norm = std::sqrt(a2);
  r.numeric_norm = std::sqrt(n2);
  const double scale = std::max(r.analytic_norm, r.numeric_norm);
  r.relative_error = scale > 0.0 ? std::sqrt(diff2) / scale : 0.0;
  return r;
}

}  // namespace oracle
