#include <cmath>
#include <sstream>

#include "blended/harness/harness.hpp"
#include "blended/lang/syntax.hpp"
#include "blended/util/error.hpp"

namespace blended::harness {

namespace {

SelfCheck check(const std::string& name, const std::function<std::string()>& body) {
  SelfCheck c;
  c.name = name;
  try {
    c.detail = body();
    c.pass = c.detail.empty();
  } catch (const std::exception& e) {
    c.detail = e.what();
  }
  return c;
}

std::string expect_int(const Domain& d, const std::string& text, std::int64_t x, std::int64_t want) {
  const auto got = d.run(*parse_program(text, d.grammar()), Value(x)).as_int();
  if (got == want) return "";
  return text + " at x=" + std::to_string(x) + " gave " + std::to_string(got);
}

// Random hole-free programs of each domain.
std::vector<ExprPtr> samples(const Domain& d, int n, std::uint64_t seed) {
  std::vector<ExprPtr> out;
  Rng rng = make_rng(seed, "selftest", fnv1a(d.name()));
  for (int i = 0; i < n; ++i) {
    if (d.name() == "lists")
      out.push_back(lists::sample_pipeline(d.grammar(), static_cast<int>(uniform_int(rng, 1, 3)), rng));
    else
      out.push_back(sample_expression(d.grammar(), d.grammar().root_type(), rng, 6));
  }
  return out;
}

std::vector<Value> inputs_for(const Domain& d, Rng& rng) {
  if (d.name() == "towers") return {Value(towers::TowerDomain::initial_state())};
  if (d.name() == "arith") return {Value(std::int64_t{-2}), Value(std::int64_t{3})};
  IntList l(lists::kInputLength);
  for (auto& v : l) v = uniform_int(rng, -64, 64);
  return {Value(l)};
}

}  // namespace

std::vector<SelfCheck> selftest() {
  const ArithmeticDomain arith;
  const lists::ListDomain lst;
  const towers::TowerDomain tow;
  std::vector<SelfCheck> out;

  out.push_back(check("arithmetic golden values", [&] {
    std::string e = expect_int(arith, "(+ (* 2 x) 1)", 3, 7);
    if (e.empty()) e = expect_int(arith, "(+ (* 2 x) 1)", 5, 11);
    if (e.empty()) e = expect_int(arith, "((lambda (x) (+ x x)) 5)", 0, 10);
    return e;
  }));

  out.push_back(check("parse/print round trip", [&] {
    for (const Domain* d : std::initializer_list<const Domain*>{&arith, &lst, &tow})
      for (const auto& p : samples(*d, 200, 1)) {
        const std::string text = print_program(*p);
        if (!equal(*parse_program(text, d->grammar()), *p)) return "round trip failed for " + text;
      }
    return std::string();
  }));

  out.push_back(check("tower embed and loop laws", [&] {
    for (const auto& p : samples(tow, 200, 2)) {
      const std::string body = print_program(*p);
      const TowerState s0{5, -1, {}};
      TowerState direct;
      try {
        direct = tow.execute(*p, s0);
      } catch (const EvalError&) {
        continue;
      }
      const auto emb = tow.execute(*parse_program("(seq (embed " + body + ") (done))", tow.grammar()), s0);
      if (emb.hand != s0.hand || emb.orientation != s0.orientation || emb.history != direct.history)
        return "embed law fails for " + body;
      TowerState seq2;
      try {
        seq2 = tow.execute(*p, tow.execute(*p, s0));
      } catch (const EvalError&) {
        continue;
      }
      const auto loop2 =
          tow.execute(*parse_program("(seq (loop 2 " + body + ") (done))", tow.grammar()), s0);
      if (!(loop2 == seq2)) return "loop law fails for " + body;
    }
    return std::string();
  }));

  out.push_back(check("blended evaluation agrees with concrete evaluation", [&] {
    ad::ParamStore ps;
    for (const Domain* d : std::initializer_list<const Domain*>{&arith, &lst, &tow}) {
      Rng rng = make_rng(3, "emb", fnv1a(d->name()));
      Embedders emb(*d, ps, 8, rng, d->name());
      Rng irng = make_rng(3, "inputs");
      for (const auto& p : samples(*d, 200, 3))
        for (const auto& x : inputs_for(*d, irng)) {
          std::optional<Value> want;
          try {
            want = d->run(*p, x);
          } catch (const EvalError&) {
          }
          ad::Tape t(ps);
          Encoder enc(emb, t);
          try {
            const BlendedValue b = enc.eval_blended(*p, d->input_context(x));
            if (!want || !b.is_concrete() || !(*b.concrete == *want))
              return "mismatch on " + print_program(*p);
          } catch (const EvalError&) {
            if (want) return "blended failed on " + print_program(*p);
          }
        }
    }
    return std::string();
  }));

  out.push_back(check("untrained model is uniform with value one half", [&] {
    Model m(lst, ModelOptions{EncoderKind::Blended, 8, 1});
    Rng rng = make_rng(4, "task");
    const auto task = lists::gen_task(rng, lst);
    const Sketch s = Sketch::initial(lst.grammar());
    const auto p = m.policy_dist(s, task.spec());
    const auto legal = legal_rules(s, lst.grammar());
    for (int r : legal)
      if (std::abs(p[static_cast<std::size_t>(r)] - 1.0 / static_cast<double>(legal.size())) > 1e-12)
        return std::string("policy is not uniform");
    if (std::abs(m.value_of(s, task.spec()) - 0.5) > 1e-12) return std::string("value is not 0.5");
    return std::string();
  }));

  out.push_back(check("uniform best-first solves a small arithmetic task", [&] {
    const Spec spec{"arith", {{Value(std::int64_t{3}), Value(std::int64_t{4})}, {Value(std::int64_t{0}), Value(std::int64_t{1})}}};
    const UniformPolicy pol(arith.grammar());
    SearchOptions o;
    o.node_budget = 5000;
    double last = 0.0;
    bool ordered = true;
    o.on_pop = [&](const Sketch&, double key) {
      ordered = ordered && key >= last;
      last = key;
    };
    const auto r = best_first(arith, spec, pol, o);
    if (!ordered) return std::string("pop costs decreased");
    if (!r.solved) return std::string("not solved");
    return std::string();
  }));

  out.push_back(check("abstraction never prunes a prefix of the target program", [&] {
    TowerGenOptions o;
    o.motif_pool = 12;
    const auto set = gen_tower_tasks(tow, 40, 0, 5, o);
    for (const auto& t : set.train) {
      Sketch s = Sketch::initial(tow.grammar());
      for (const auto& a : derive_actions(t.program, tow.grammar())) {
        if (prune_hook(tow, s, t.spec)) return "pruned " + print_program(*s.root()) + " of " + t.id;
        s = apply_action(s, a, tow.grammar());
      }
    }
    return std::string();
  }));

  return out;
}

}  // namespace blended::harness
