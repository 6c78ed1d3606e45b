#include <algorithm>
#include <charconv>
#include <numeric>
#include <sstream>

#include "cashlab/harness.hpp"

namespace cashlab {

namespace {

std::string num(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_rank_chart(const RankSummary& summary, const PValueMatrix& adjusted,
                              double alpha, const std::vector<std::string>& method_names) {
  const auto k = static_cast<std::size_t>(summary.average_ranks.size());
  if (k == 0) throw HarnessError("rank chart needs at least one method");
  if (method_names.size() != k) throw HarnessError("rank chart: method names do not match ranks");
  if (!adjusted.empty() && (static_cast<std::size_t>(adjusted.adjusted.rows()) != k ||
                            static_cast<std::size_t>(adjusted.adjusted.cols()) != k)) {
    throw HarnessError("rank chart: p-value matrix does not match ranks");
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return summary.average_ranks[static_cast<Eigen::Index>(a)] <
           summary.average_ranks[static_cast<Eigen::Index>(b)];
  });

  auto connected = [&](std::size_t a, std::size_t b) {
    if (adjusted.empty()) return true;
    return adjusted.adjusted(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) > alpha;
  };
  std::vector<std::pair<std::size_t, std::size_t>> links;  // positions in `order`
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (connected(order[i], order[j])) links.emplace_back(i, j);
    }
  }

  const double bar_w = 60.0;
  const double gap = 20.0;
  const double left = 50.0;
  const double top = 30.0;
  const double plot_h = 240.0;
  const double link_step = 10.0;
  const double max_rank = static_cast<double>(k);
  const double width = left + static_cast<double>(k) * (bar_w + gap) + gap;
  const double base = top + plot_h;
  const double height = base + 40.0 + static_cast<double>(links.size()) * link_step + 10.0;
  auto center = [&](std::size_t pos) {
    return left + gap + static_cast<double>(pos) * (bar_w + gap) + bar_w / 2.0;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<text x=\"" << num(left) << "\" y=\"18\">Average rank (lower is better)</text>\n";
  svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
      << "\" y2=\"" << num(base) << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= static_cast<int>(k); ++tick) {
    const double y = base - plot_h * tick / max_rank;
    svg << "<text x=\"" << num(left - 6.0) << "\" y=\"" << num(y + 4.0)
        << "\" text-anchor=\"end\">" << tick << "</text>\n";
  }
  for (std::size_t pos = 0; pos < k; ++pos) {
    const std::size_t m = order[pos];
    const double rank = summary.average_ranks[static_cast<Eigen::Index>(m)];
    const double h = plot_h * rank / max_rank;
    const double x = center(pos) - bar_w / 2.0;
    svg << "<rect x=\"" << num(x) << "\" y=\"" << num(base - h) << "\" width=\"" << num(bar_w)
        << "\" height=\"" << num(h) << "\" fill=\"#4c72b0\"/>\n";
    svg << "<text x=\"" << num(center(pos)) << "\" y=\"" << num(base - h - 4.0)
        << "\" text-anchor=\"middle\">" << num(rank) << "</text>\n";
    svg << "<text x=\"" << num(center(pos)) << "\" y=\"" << num(base + 14.0)
        << "\" text-anchor=\"middle\">" << escape(method_names[m]) << "</text>\n";
  }
  for (std::size_t l = 0; l < links.size(); ++l) {
    const double y = base + 30.0 + static_cast<double>(l) * link_step;
    svg << "<line class=\"connector\" x1=\"" << num(center(links[l].first)) << "\" y1=\"" << num(y)
        << "\" x2=\"" << num(center(links[l].second)) << "\" y2=\"" << num(y)
        << "\" stroke=\"#c44e52\" stroke-width=\"3\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace cashlab
