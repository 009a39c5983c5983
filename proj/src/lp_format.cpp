// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "pwlbo/miqp_model.hpp"

namespace pwlbo {
namespace {

constexpr int kTermsPerLine = 6;

const char* sense_token(Sense s) {
  switch (s) {
    case Sense::LessEqual:
      return "<=";
    case Sense::GreaterEqual:
      return ">=";
    case Sense::Equal:
      return "=";
  }
  return "=";
}

class TermWriter {
 public:
  explicit TermWriter(std::ostream& out) : out_(out) {}
  void term(double coef, const std::string& name) {
    wrap();
    out_ << ' ' << (coef < 0.0 ? '-' : '+') << ' ' << format_double(std::abs(coef)) << ' ' << name;
  }
  void square(double coef, const std::string& name) {
    term(coef, name);
    out_ << " ^2";
  }
  void product(double coef, const std::string& a, const std::string& b) {
    term(coef, a);
    out_ << " * " << b;
  }
  void raw(const char* s) { out_ << ' ' << s; }

 private:
  void wrap() {
    if (count_ > 0 && count_ % kTermsPerLine == 0) out_ << "\n   ";
    ++count_;
  }
  std::ostream& out_;
  int count_ = 0;
};

std::string row_name(const std::string& name, const char* stem, std::size_t k) {
  return name.empty() ? std::string(stem) + std::to_string(k) : name;
}

}  // namespace

void export_lp_text(std::ostream& out, const MiqpModel& model) {
  const auto& vars = model.variables;
  out << "\\ acquisition model: " << model.num_variables() << " variables, " << model.num_binaries()
      << " binaries\n";
  out << "Minimize\n obj:";
  {
    TermWriter w(out);
    for (const auto& [j, c] : model.objective) w.term(c, vars[j].name);
  }
  out << "\nSubject To\n";
  for (std::size_t k = 0; k < model.linear.size(); ++k) {
    const LinearConstraint& c = model.linear[k];
    out << ' ' << row_name(c.name, "c", k) << ':';
    TermWriter w(out);
    for (const auto& [j, a] : c.coefficients) w.term(a, vars[j].name);
    out << ' ' << sense_token(c.sense) << ' ' << format_double(c.rhs) << '\n';
  }
  for (std::size_t k = 0; k < model.quadratic.size(); ++k) {
    const QuadConstraint& c = model.quadratic[k];
    out << ' ' << row_name(c.name, "q", k) << ':';
    TermWriter w(out);
    for (const auto& [j, a] : c.linear) w.term(a, vars[j].name);
    w.raw("+ [");
    for (const QuadTerm& t : c.quad) {
      if (t.first == t.second) {
        w.square(t.coef, vars[t.first].name);
      } else {
        w.product(t.coef, vars[t.first].name, vars[t.second].name);
      }
    }
    w.raw("]");
    out << ' ' << sense_token(c.sense) << ' ' << format_double(c.rhs) << '\n';
  }
  out << "Bounds\n";
  for (const VariableDef& v : vars) {
    out << ' ' << format_double(v.lower) << " <= " << v.name << " <= " << format_double(v.upper) << '\n';
  }
  out << "Binaries\n";
  int col = 0;
  for (const VariableDef& v : vars) {
    if (v.kind != VarKind::Binary) continue;
    out << (col == 0 ? " " : " ") << v.name;
    if (++col == 8) {
      out << '\n';
      col = 0;
    }
  }
  if (col != 0) out << '\n';
  out << "End\n";
}

std::string export_lp_text(const MiqpModel& model) {
  std::ostringstream s;
  export_lp_text(s, model);
  return s.str();
}

// ---------------------------------------------------------------------------

namespace {

enum class Section { None, Objective, Constraints, Bounds, Binaries, End };

bool is_sense(const std::string& t) { return t == "<=" || t == ">=" || t == "=" || t == "=<" || t == "=>"; }

Sense to_sense(const std::string& t) {
  if (t == "<=" || t == "=<") return Sense::LessEqual;
  if (t == ">=" || t == "=>") return Sense::GreaterEqual;
  return Sense::Equal;
}

bool is_number(const std::string& t) {
  if (t.empty()) return false;
  const char c = t[0];
  return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || ((c == '-' || c == '+') && t.size() > 1);
}

struct Expression {
  SparseRow linear;
  std::vector<QuadTerm> quad;
};

class RowParser {
 public:
  RowParser(const std::vector<std::string>& tokens, const std::map<std::string, int>& ids)
      : tok_(tokens), ids_(ids) {}

  Expression parse_until_sense(std::size_t& pos) {
    Expression e;
    bool in_quad = false;
    while (pos < tok_.size() && !is_sense(tok_[pos])) {
      const std::string& t = tok_[pos];
      if (t == "[") {
        in_quad = true;
        ++pos;
        continue;
      }
      if (t == "]") {
        in_quad = false;
        ++pos;
        continue;
      }
      double sign = 1.0;
      if (t == "+" || t == "-") {
        sign = (t == "-") ? -1.0 : 1.0;
        ++pos;
        if (pos < tok_.size() && tok_[pos] == "[") continue;
      }
      double coef = 1.0;
      if (pos < tok_.size() && is_number(tok_[pos])) coef = parse_double(tok_[pos++]);
      if (pos >= tok_.size()) throw ConfigError("LP text: expression ends after a coefficient");
      const int a = id(tok_[pos++]);
      if (in_quad && pos < tok_.size() && tok_[pos] == "^2") {
        ++pos;
        e.quad.push_back({a, a, sign * coef});
      } else if (in_quad && pos < tok_.size() && tok_[pos] == "*") {
        ++pos;
        if (pos >= tok_.size()) throw ConfigError("LP text: dangling product");
        e.quad.push_back({a, id(tok_[pos++]), sign * coef});
      } else {
        e.linear.emplace_back(a, sign * coef);
      }
    }
    return e;
  }

 private:
  int id(const std::string& name) const {
    const auto it = ids_.find(name);
    if (it == ids_.end()) throw ConfigError("LP text: undeclared variable '" + name + "'");
    return it->second;
  }
  const std::vector<std::string>& tok_;
  const std::map<std::string, int>& ids_;
};

}  // namespace

MiqpModel parse_lp_text(std::istream& in) {
  std::map<Section, std::vector<std::string>> tokens;
  std::vector<std::string> bound_lines, binary_tokens;
  Section sec = Section::None;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto p = line.find('\\'); p != std::string::npos) line.erase(p);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "Minimize") {
      sec = Section::Objective;
      continue;
    }
    if (first == "Subject") {
      sec = Section::Constraints;
      continue;
    }
    if (first == "Bounds") {
      sec = Section::Bounds;
      continue;
    }
    if (first == "Binaries") {
      sec = Section::Binaries;
      continue;
    }
    if (first == "End") {
      sec = Section::End;
      continue;
    }
    if (sec == Section::Bounds) {
      bound_lines.push_back(line);
      continue;
    }
    std::istringstream all(line);
    std::string t;
    while (all >> t) tokens[sec].push_back(t);
  }

  MiqpModel m;
  std::map<std::string, int> ids;
  for (const std::string& b : bound_lines) {
    std::istringstream ls(b);
    std::string lo, op1, name, op2, hi;
    if (!(ls >> lo >> op1 >> name >> op2 >> hi) || op1 != "<=" || op2 != "<=") {
      throw ConfigError("LP text: unsupported bound line '" + b + "'");
    }
    if (ids.count(name)) throw ConfigError("LP text: duplicate bound for '" + name + "'");
    ids[name] = m.num_variables();
    m.variables.push_back({name, VarKind::Continuous, parse_double(lo), parse_double(hi)});
  }
  for (const std::string& name : tokens[Section::Binaries]) {
    const auto it = ids.find(name);
    if (it == ids.end()) throw ConfigError("LP text: binary '" + name + "' has no bounds");
    m.variables[static_cast<std::size_t>(it->second)].kind = VarKind::Binary;
  }

  {
    const auto& t = tokens[Section::Objective];
    std::size_t pos = 0;
    if (pos < t.size() && t[pos].back() == ':') ++pos;
    RowParser p(t, ids);
    m.objective = p.parse_until_sense(pos).linear;
  }

  const auto& t = tokens[Section::Constraints];
  RowParser p(t, ids);
  std::size_t pos = 0;
  while (pos < t.size()) {
    std::string name;
    if (t[pos].back() == ':') {
      name = t[pos].substr(0, t[pos].size() - 1);
      ++pos;
    }
    Expression e = p.parse_until_sense(pos);
    if (pos + 1 >= t.size()) throw ConfigError("LP text: constraint '" + name + "' lacks a right-hand side");
    const Sense s = to_sense(t[pos]);
    const double rhs = parse_double(t[pos + 1]);
    pos += 2;
    if (e.quad.empty()) {
      m.linear.push_back({std::move(e.linear), s, rhs, name});
    } else {
      QuadConstraint q;
      q.linear = std::move(e.linear);
      q.quad = std::move(e.quad);
      q.sense = s;
      q.rhs = rhs;
      q.tag = (s == Sense::Equal) ? QuadTag::NonconvexEquality : QuadTag::Convex;
      q.name = name;
      m.quadratic.push_back(std::move(q));
    }
  }
  return m;
}

}  // namespace pwlbo
