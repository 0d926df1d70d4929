#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>

#include "rlx/qnet.hpp"

namespace rlx {

// Shortest decimal text that parses back to exactly `v`.
template <typename Scalar>
std::string format_real(Scalar v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename Scalar>
Scalar parse_real(const std::string& text) {
  Scalar v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::runtime_error("not a real number: '" + text + "'");
  return v;
}

/// Checkpoint text format, one record per line:
///
///   rlx-qnet 1
///   layer_dims <d0> <d1> ... <dL>
///   dropout_rate <p>
///   activation <relu|identity|tanh>
///   then for each layer l in order: one line per weight row
///   (dims[l] values), then one line with the dims[l+1] biases.
///
/// Reals are written in shortest round-trip form, so load(save(net)) == net.
template <typename Scalar>
void save_network(const QNetwork<Scalar>& net, std::ostream& out) {
  out << "rlx-qnet 1\nlayer_dims";
  for (const auto d : net.layer_dims()) out << ' ' << d;
  out << "\ndropout_rate " << format_real(net.dropout_rate()) << '\n'
      << "activation " << activation_name(net.activation()) << '\n';
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& w = net.weight(l);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        out << (c ? " " : "") << format_real(w(r, c));
      out << '\n';
    }
    const auto& b = net.bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i)
      out << (i ? " " : "") << format_real(b(i));
    out << '\n';
  }
}

template <typename Scalar = double>
QNetwork<Scalar> load_network(std::istream& in) {
  auto expect = [&](const std::string& word) {
    std::string got;
    if (!(in >> got) || got != word)
      throw std::runtime_error("checkpoint: expected '" + word + "', got '" +
                               got + "'");
  };
  auto next_token = [&] {
    std::string tok;
    if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated");
    return tok;
  };

  expect("rlx-qnet");
  expect("1");
  expect("layer_dims");
  std::string line;
  std::getline(in, line);
  std::istringstream dims_in(line);
  LayerDims dims;
  for (Eigen::Index d; dims_in >> d;) dims.push_back(d);
  expect("dropout_rate");
  const Scalar p = parse_real<Scalar>(next_token());
  expect("activation");
  const Activation act = parse_activation(next_token());

  QNetwork<Scalar> net(dims, p, act);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto& w = net.weight(l);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = parse_real<Scalar>(next_token());
    auto& b = net.bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i)
      b(i) = parse_real<Scalar>(next_token());
  }
  std::string extra;
  if (in >> extra) throw std::runtime_error("checkpoint: trailing data");
  return net;
}

template <typename Scalar>
void save_network(const QNetwork<Scalar>& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  save_network(net, out);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

template <typename Scalar = double>
QNetwork<Scalar> load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return load_network<Scalar>(in);
}

}  // namespace rlx
