#pragma once

// Model extraction from deep-learning programs. The extractor walks the
// parsed statement tree path by path (one path per if/elif/else arm),
// unrolls literal-bounded loops, inlines helper functions one level
// deep, and assembles layer calls into abstract networks. Constructs it
// cannot extract turn into diagnostics, never failures.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nascur/ann.hpp"
#include "nascur/errors.hpp"
#include "nascur/pysource.hpp"

namespace nascur {

struct ProgramSource {
    std::string path;
    std::string text;
    std::vector<std::string> imports;
};

struct Diagnostic {
    std::string path;
    std::string reason;
};

struct MiningReport {
    long programs_scanned = 0;
    long framework_programs = 0;
    long models_extracted = 0;
    long complete_models = 0;
    long supported_models = 0;
    long deduped_models = 0;
    std::vector<Diagnostic> diagnostics;
};

// ---------------------------------------------------------------------------
// Per-model predicates

// A complete model has an input layer (the first convolutional node,
// carrying input_shape), at least one activation node, and an output
// layer (a linear node).
inline bool is_complete(const AbstractNeuralNetwork& ann) {
    bool act = false, lin = false;
    int first_conv = -1;
    for (std::size_t i = 0; i < ann.nodes.size(); ++i) {
        const auto& f = ann.nodes[i].func;
        if (first_conv < 0 && f == layer::conv) first_conv = static_cast<int>(i);
        act = act || is_activation(f);
        lin = lin || f == layer::linear;
    }
    return first_conv >= 0 && act && lin &&
           ann.nodes[first_conv].named("input_shape") != nullptr;
}

inline bool is_supported(const AbstractNeuralNetwork& ann, const LayerVocabulary& vocab) {
    for (const auto& n : ann.nodes)
        if (!vocab.supported_layers.count(n.func)) return false;
    return true;
}

// Keeps the first occurrence of each ann_equal equivalence class.
inline std::vector<AbstractNeuralNetwork> dedupe(
    const std::vector<AbstractNeuralNetwork>& models) {
    std::vector<AbstractNeuralNetwork> out;
    for (const auto& m : models) {
        bool dup = false;
        for (const auto& kept : out)
            if (ann_equal(kept, m)) { dup = true; break; }
        if (!dup) out.push_back(m);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Framework detection

namespace detail {

inline void collect_imports(const std::vector<pysrc::Stmt>& stmts,
                            std::vector<std::string>& out) {
    for (const auto& s : stmts) {
        if (s.kind == pysrc::Stmt::Import)
            out.insert(out.end(), s.modules.begin(), s.modules.end());
        for (const auto& arm : s.arms) collect_imports(arm, out);
        collect_imports(s.body, out);
    }
}

inline bool path_has_segment(const std::string& dotted, const std::string& segment) {
    std::size_t start = 0;
    while (start <= dotted.size()) {
        std::size_t dot = dotted.find('.', start);
        std::size_t len = (dot == std::string::npos ? dotted.size() : dot) - start;
        if (dotted.compare(start, len, segment) == 0) return true;
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return false;
}

}  // namespace detail

inline ProgramSource make_program_source(std::string path, std::string text) {
    ProgramSource src;
    src.path = std::move(path);
    src.text = std::move(text);
    auto stmts = pysrc::parse_program(src.text);
    detail::collect_imports(stmts, src.imports);
    return src;
}

// True iff any import statement, wherever it sits, references the target
// framework namespace. Unparseable files count as false.
inline bool detect_framework_program(const ProgramSource& src,
                                     const std::string& framework = "keras") {
    if (!src.imports.empty()) {
        for (const auto& m : src.imports)
            if (detail::path_has_segment(m, framework)) return true;
        return false;
    }
    try {
        std::vector<std::string> imports;
        detail::collect_imports(pysrc::parse_program(src.text), imports);
        for (const auto& m : imports)
            if (detail::path_has_segment(m, framework)) return true;
    } catch (const Error&) {
        return false;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Extraction

namespace detail {

inline const std::map<std::string, std::string>& optimizer_names() {
    static const std::map<std::string, std::string> m = {
        {"SGD", "SGD"},           {"sgd", "SGD"},
        {"Adam", "Adam"},         {"adam", "Adam"},
        {"RMSprop", "RMSprop"},   {"rmsprop", "RMSprop"},
        {"Adagrad", "Adagrad"},   {"adagrad", "Adagrad"},
        {"Adadelta", "Adadelta"}, {"adadelta", "Adadelta"},
        {"Adamax", "Adamax"},     {"adamax", "Adamax"},
        {"Nadam", "Nadam"},       {"nadam", "Nadam"},
    };
    return m;
}

struct Binding {
    enum Kind { None, Builder, Tensor, LayerObj, Optimizer, Lit, ModelRef };
    Kind kind = None;
    int id = -1;                            // builder id / tensor node / model decl
    Literal lit = std::int64_t{0};
    RawLayer layer;                          // LayerObj payload
    OptimizerSpec opt;                       // Optimizer payload
    std::optional<IntList> pending_shape;    // Tensor: shape waiting for a conv
};

struct ModelDecl {
    enum Source { SequentialChain, ImplicitChain, Functional };
    Source source = SequentialChain;
    int builder = -1;               // builder id for chains
    int output_node = -1;           // functional: terminal arena node
    std::optional<OptimizerSpec> optimizer;
    int first_node = -1;            // program-order key
};

struct ArenaNode {
    RawLayer raw;
    bool in_branch = false;
};

struct PathState {
    std::vector<ArenaNode> nodes;
    std::vector<Edge> edges;
    std::vector<std::vector<int>> builders;  // builder id -> chain nodes
    int implicit_builder = -1;
    std::vector<ModelDecl> decls;            // finalized functional models
    std::vector<OptimizerSpec> optimizer_events;
    std::map<std::string, Binding> env;
    std::map<int, std::optional<OptimizerSpec>> builder_optimizer;
    bool lossy = false;
    bool branchy = false;
    int branch_depth = 0;
    int inline_depth = 0;
    std::optional<Binding> returned;
};

struct ExtractedModel {
    AbstractNeuralNetwork ann;
    bool needs_complete = false;  // assembled through a branch or lossy path
};

class Extractor {
public:
    Extractor(const std::string& path, const LayerVocabulary& vocab)
        : path_(path), vocab_(vocab) {}

    std::vector<AbstractNeuralNetwork> models;
    std::vector<Diagnostic> diagnostics;

    void run(const std::vector<pysrc::Stmt>& program) {
        index_functions(program, "");
        std::vector<ExtractedModel> raw;
        collect_from_block(program, raw);
        // Function bodies that build models but are never called become
        // their own extraction roots.
        for (const auto& [name, def] : functions_) {
            if (called_.count(name)) continue;
            if (!block_relevant(def->body)) continue;
            collect_from_block(def->body, raw);
        }
        finalize(raw);
    }

private:
    std::string path_;
    const LayerVocabulary& vocab_;
    std::map<std::string, const pysrc::Stmt*> functions_;
    std::set<std::string> called_;
    std::set<std::string> diag_reasons_;
    static constexpr int kMaxPaths = 32;
    static constexpr int kMaxUnroll = 64;

    void diag(const std::string& reason) { diag_reasons_.insert(reason); }

    void index_functions(const std::vector<pysrc::Stmt>& stmts, const std::string& scope) {
        for (const auto& s : stmts) {
            if (s.kind == pysrc::Stmt::FuncDef) {
                functions_.emplace(s.target, &s);
            } else if (s.kind == pysrc::Stmt::ClassDef) {
                index_functions(s.body, s.target);
            }
        }
    }

    // --- relevance scan -----------------------------------------------------

    bool call_name_relevant(const std::string& name) const {
        if (name.empty()) return false;
        if (is_layer_call_name(name)) return true;
        if (optimizer_names().count(name)) return true;
        if (name == "Sequential" || name == "Model" || name == "Input") return true;
        if (name == "add" || name == "compile" || name == "fit") return true;
        return functions_.count(name) > 0;
    }

    bool expr_relevant(const pysrc::Expr& e) const {
        if (e.kind == pysrc::Expr::Call) {
            if (e.base) {
                std::string tail = e.base->tail();
                if (call_name_relevant(tail)) return true;
                if (expr_relevant(*e.base)) return true;
            }
        } else if (e.base) {
            if (expr_relevant(*e.base)) return true;
        }
        for (const auto& a : e.args)
            if (expr_relevant(a)) return true;
        for (const auto& [k, v] : e.kwargs)
            if (expr_relevant(v)) return true;
        for (const auto& el : e.elts)
            if (expr_relevant(el)) return true;
        return false;
    }

    bool stmt_relevant(const pysrc::Stmt& s) const {
        if (s.kind == pysrc::Stmt::Import) return false;
        if (expr_relevant(s.value)) return true;
        for (const auto& arm : s.arms)
            if (block_relevant(arm)) return true;
        if (s.kind != pysrc::Stmt::FuncDef && s.kind != pysrc::Stmt::ClassDef)
            return block_relevant(s.body);
        return false;
    }

    bool block_relevant(const std::vector<pysrc::Stmt>& b) const {
        for (const auto& s : b)
            if (stmt_relevant(s)) return true;
        return false;
    }

    // --- literal evaluation --------------------------------------------------

    std::optional<Literal> eval_literal(const pysrc::Expr& e, const PathState& st) const {
        switch (e.kind) {
            case pysrc::Expr::Int: return Literal{e.ival};
            case pysrc::Expr::Float: return Literal{e.fval};
            case pysrc::Expr::Str: return Literal{e.text};
            case pysrc::Expr::Name: {
                auto it = st.env.find(e.text);
                if (it != st.env.end() && it->second.kind == Binding::Lit)
                    return it->second.lit;
                return std::nullopt;
            }
            case pysrc::Expr::Sequence: {
                IntList xs;
                for (const auto& el : e.elts) {
                    auto v = eval_literal(el, st);
                    if (!v || !is_int(*v)) return std::nullopt;
                    xs.push_back(std::get<std::int64_t>(*v));
                }
                return Literal{xs};
            }
            default: return std::nullopt;
        }
    }

    // Parses a layer constructor call into a RawLayer; nullopt when any
    // argument falls outside the literal domain.
    std::optional<RawLayer> layer_from_call(const pysrc::Expr& call, const PathState& st) const {
        RawLayer raw;
        raw.callee = call.base->tail();
        for (const auto& a : call.args) {
            auto v = eval_literal(a, st);
            if (!v) return std::nullopt;
            raw.positional.push_back(*v);
        }
        for (const auto& [k, v] : call.kwargs) {
            auto lit = eval_literal(v, st);
            if (!lit) return std::nullopt;
            raw.named.emplace_back(k, *lit);
        }
        return raw;
    }

    std::optional<OptimizerSpec> optimizer_from_call(const pysrc::Expr& call,
                                                     const PathState& st) const {
        auto it = optimizer_names().find(call.base->tail());
        if (it == optimizer_names().end()) return std::nullopt;
        OptimizerSpec opt;
        opt.func = it->second;
        // Keras signature: the first positional argument is the rate.
        if (!call.args.empty()) {
            auto v = eval_literal(call.args[0], st);
            if (v && (is_int(*v) || is_float(*v))) opt.named_args["lr"] = *v;
        }
        for (const auto& [k, v] : call.kwargs) {
            auto lit = eval_literal(v, st);
            if (lit && (is_int(*lit) || is_float(*lit))) opt.named_args[k] = *lit;
        }
        return opt;
    }

    // --- arena helpers --------------------------------------------------------

    int add_node(PathState& st, RawLayer raw) {
        st.nodes.push_back({std::move(raw), st.branch_depth > 0});
        return static_cast<int>(st.nodes.size()) - 1;
    }

    int ensure_builder(PathState& st, const std::string& var) {
        auto it = st.env.find(var);
        if (it != st.env.end() && it->second.kind == Binding::Builder) return it->second.id;
        st.builders.emplace_back();
        Binding b;
        b.kind = Binding::Builder;
        b.id = static_cast<int>(st.builders.size()) - 1;
        st.env[var] = b;
        return b.id;
    }

    void builder_append(PathState& st, int builder, RawLayer raw) {
        int node = add_node(st, std::move(raw));
        auto& chain = st.builders[builder];
        if (!chain.empty()) st.edges.emplace_back(chain.back(), node);
        chain.push_back(node);
    }

    // --- call handling ---------------------------------------------------------

    bool is_tensor_expr(const pysrc::Expr& e, const PathState& st) const {
        if (e.kind == pysrc::Expr::Name) {
            auto it = st.env.find(e.text);
            return it != st.env.end() && it->second.kind == Binding::Tensor;
        }
        if (e.kind == pysrc::Expr::Sequence) {
            if (e.elts.empty()) return false;
            for (const auto& el : e.elts)
                if (!is_tensor_expr(el, st)) return false;
            return true;
        }
        if (e.kind == pysrc::Expr::Call) return true;  // nested application
        return false;
    }

    // Applies a layer to tensor inputs; returns the result tensor binding.
    // Unresolvable inputs break the connection (the node still exists) and
    // make the path lossy.
    std::optional<Binding> apply_layer(PathState& st, RawLayer raw,
                                       const std::vector<pysrc::Expr>& inputs) {
        std::vector<Binding> in;
        auto take = [&](const pysrc::Expr& e) {
            auto b = tensor_of(st, e);
            if (b && b->kind == Binding::Tensor)
                in.push_back(*b);
            else
                mark_unextractable("layer applied to an unresolvable input", st);
        };
        for (const auto& e : inputs) {
            if (e.kind == pysrc::Expr::Sequence)
                for (const auto& el : e.elts) take(el);
            else
                take(e);
        }
        std::optional<IntList> pending;
        for (const auto& b : in)
            if (b.pending_shape && !pending) pending = b.pending_shape;
        if (pending) {
            auto mapped = map_layer_name(raw.callee);
            bool has_shape = false;
            for (const auto& [k, v] : raw.named) has_shape = has_shape || k == "input_shape";
            if (mapped && *mapped == layer::conv && !has_shape) {
                raw.named.emplace_back("input_shape", *pending);
                pending.reset();
            }
        }
        int node = add_node(st, std::move(raw));
        for (const auto& b : in)
            if (b.id >= 0) st.edges.emplace_back(b.id, node);
        Binding out;
        out.kind = Binding::Tensor;
        out.id = node;
        out.pending_shape = pending;
        return out;
    }

    std::optional<Binding> tensor_of(PathState& st, const pysrc::Expr& e) {
        if (e.kind == pysrc::Expr::Name) {
            auto it = st.env.find(e.text);
            if (it != st.env.end() && it->second.kind == Binding::Tensor) return it->second;
            return std::nullopt;
        }
        if (e.kind == pysrc::Expr::Call) return eval_call(st, e);
        return std::nullopt;
    }

    // Evaluates a call expression for its binding value (tensor, builder,
    // optimizer, ...). Records layer nodes and events as side effects.
    std::optional<Binding> eval_call(PathState& st, const pysrc::Expr& call) {
        if (!call.base) return std::nullopt;
        const pysrc::Expr& callee = *call.base;

        // Curried application: Ctor(args...)(tensors...).
        if (callee.kind == pysrc::Expr::Call && callee.base) {
            std::string inner = callee.base->tail();
            if (is_layer_call_name(inner)) {
                auto raw = layer_from_call(callee, st);
                if (!raw) {
                    mark_unextractable("layer call with non-literal arguments: " + inner, st);
                    return std::nullopt;
                }
                return apply_layer(st, std::move(*raw), call.args);
            }
            return std::nullopt;
        }

        std::string name = callee.tail();

        // Receiver methods. Dotted constructor paths (keras.layers.Conv2D)
        // are attribute chains too, so only known method names route here.
        if (callee.kind == pysrc::Expr::Attr && callee.base &&
            (name == "add" || name == "compile" || name == "fit")) {
            std::string receiver = callee.base->dotted();
            if (name == "add") {
                if (call.args.size() == 1)
                    return handle_builder_add(st, receiver, call.args[0]);
                return std::nullopt;
            }
            handle_compile(st, receiver, call, name == "compile");
            return std::nullopt;
        }

        if (name == "Sequential") {
            st.builders.emplace_back();
            Binding b;
            b.kind = Binding::Builder;
            b.id = static_cast<int>(st.builders.size()) - 1;
            if (!call.args.empty() && call.args[0].kind == pysrc::Expr::Sequence) {
                for (const auto& el : call.args[0].elts) {
                    if (el.kind == pysrc::Expr::Call && el.base) {
                        auto raw = layer_from_call(el, st);
                        if (raw && is_layer_call_name(raw->callee)) {
                            builder_append(st, b.id, std::move(*raw));
                            continue;
                        }
                    }
                    mark_unextractable("unextractable layer in Sequential list", st);
                }
            }
            return b;
        }
        if (name == "Input") {
            Binding b;
            b.kind = Binding::Tensor;
            b.id = -1;
            for (const auto& [k, v] : call.kwargs) {
                if (k != "shape") continue;
                auto lit = eval_literal(v, st);
                if (lit && is_int_list(*lit)) b.pending_shape = std::get<IntList>(*lit);
            }
            if (!b.pending_shape && !call.args.empty()) {
                auto lit = eval_literal(call.args[0], st);
                if (lit && is_int_list(*lit)) b.pending_shape = std::get<IntList>(*lit);
            }
            return b;
        }
        if (name == "Model") {
            // Model(inputs, outputs) / Model(inputs=..., outputs=...).
            const pysrc::Expr* out_expr = nullptr;
            if (call.args.size() >= 2) out_expr = &call.args[1];
            for (const auto& [k, v] : call.kwargs)
                if (k == "outputs" || k == "output") out_expr = &v;
            if (!out_expr) return std::nullopt;
            auto out = tensor_of(st, *out_expr);
            if (!out || out->id < 0) return std::nullopt;
            ModelDecl decl;
            decl.source = ModelDecl::Functional;
            decl.output_node = out->id;
            st.decls.push_back(decl);
            Binding b;
            b.kind = Binding::ModelRef;
            b.id = static_cast<int>(st.decls.size()) - 1;
            return b;
        }
        if (auto opt_it = optimizer_names().find(name); opt_it != optimizer_names().end()) {
            auto opt = optimizer_from_call(call, st);
            if (opt) {
                st.optimizer_events.push_back(*opt);
                Binding b;
                b.kind = Binding::Optimizer;
                b.opt = *opt;
                return b;
            }
            return std::nullopt;
        }
        if (is_layer_call_name(name)) {
            // Plain constructor. Direct application form add([a, b]) /
            // concatenate([a, b]) takes tensors instead of literals.
            bool tensor_args = false;
            for (const auto& a : call.args) tensor_args = tensor_args || is_tensor_expr(a, st);
            if (tensor_args) {
                RawLayer raw;
                raw.callee = name;
                return apply_layer(st, std::move(raw), call.args);
            }
            auto raw = layer_from_call(call, st);
            if (!raw) {
                mark_unextractable("layer call with non-literal arguments: " + name, st);
                return std::nullopt;
            }
            Binding b;
            b.kind = Binding::LayerObj;
            b.layer = std::move(*raw);
            return b;
        }
        if (auto fit = functions_.find(name); fit != functions_.end()) {
            return inline_helper(st, *fit->second, call);
        }
        // Unknown callable; only worth noting when model content is inside.
        for (const auto& a : call.args)
            if (expr_relevant(a)) mark_unextractable("layer call in unsupported context", st);
        for (const auto& [k, v] : call.kwargs)
            if (expr_relevant(v)) mark_unextractable("layer call in unsupported context", st);
        return std::nullopt;
    }

    std::optional<Binding> handle_builder_add(PathState& st, const std::string& receiver,
                                              const pysrc::Expr& arg) {
        int builder = ensure_builder(st, receiver);
        if (arg.kind == pysrc::Expr::Call && arg.base) {
            // model.add(Conv2D(...)) with a plain constructor inside.
            if (arg.base->kind != pysrc::Expr::Call && is_layer_call_name(arg.base->tail())) {
                auto raw = layer_from_call(arg, st);
                if (!raw) {
                    mark_unextractable(
                        "layer call with non-literal arguments: " + arg.base->tail(), st);
                    return std::nullopt;
                }
                builder_append(st, builder, std::move(*raw));
                return std::nullopt;
            }
            mark_unextractable("unextractable add() argument", st);
            return std::nullopt;
        }
        if (arg.kind == pysrc::Expr::Name) {
            auto it = st.env.find(arg.text);
            if (it != st.env.end() && it->second.kind == Binding::LayerObj) {
                builder_append(st, builder, it->second.layer);
                return std::nullopt;
            }
        }
        mark_unextractable("unextractable add() argument", st);
        return std::nullopt;
    }

    void handle_compile(PathState& st, const std::string& receiver, const pysrc::Expr& call,
                        bool is_compile) {
        std::optional<OptimizerSpec> opt;
        const pysrc::Expr* opt_expr = nullptr;
        for (const auto& [k, v] : call.kwargs)
            if (k == "optimizer") opt_expr = &v;
        if (!opt_expr && is_compile && !call.args.empty()) opt_expr = &call.args[0];
        if (opt_expr) {
            if (opt_expr->kind == pysrc::Expr::Str) {
                auto it = optimizer_names().find(opt_expr->text);
                if (it != optimizer_names().end()) {
                    OptimizerSpec o;
                    o.func = it->second;
                    opt = o;
                }
            } else if (opt_expr->kind == pysrc::Expr::Name) {
                auto it = st.env.find(opt_expr->text);
                if (it != st.env.end() && it->second.kind == Binding::Optimizer)
                    opt = it->second.opt;
            } else if (opt_expr->kind == pysrc::Expr::Call) {
                auto b = eval_call(st, *opt_expr);
                if (b && b->kind == Binding::Optimizer) opt = b->opt;
            }
        }
        if (!opt) return;
        st.optimizer_events.push_back(*opt);
        auto it = st.env.find(receiver);
        if (it == st.env.end()) return;
        if (it->second.kind == Binding::Builder)
            st.builder_optimizer[it->second.id] = opt;
        else if (it->second.kind == Binding::ModelRef && it->second.id >= 0 &&
                 it->second.id < static_cast<int>(st.decls.size()))
            st.decls[it->second.id].optimizer = opt;
    }

    std::optional<Binding> inline_helper(PathState& st, const pysrc::Stmt& def,
                                         const pysrc::Expr& call) {
        if (st.inline_depth >= 1) {
            if (block_relevant(def.body))
                mark_unextractable("nested helper call not inlined: " + def.target, st);
            return std::nullopt;
        }
        called_.insert(def.target);
        auto saved_env = st.env;
        // Defaults first, then positional arguments in order.
        for (const auto& [p, d] : def.defaults) {
            auto lit = eval_literal(d, st);
            if (lit) {
                Binding b;
                b.kind = Binding::Lit;
                b.lit = *lit;
                st.env[p] = b;
            }
        }
        std::size_t nparams = def.params.size();
        // Methods take self as an implicit first parameter.
        std::size_t p0 = (nparams > 0 && def.params[0] == "self") ? 1 : 0;
        for (std::size_t i = 0; i < call.args.size() && p0 + i < nparams; ++i) {
            const std::string& p = def.params[p0 + i];
            const pysrc::Expr& a = call.args[i];
            if (a.kind == pysrc::Expr::Name) {
                auto it = saved_env.find(a.text);
                if (it != saved_env.end()) {
                    st.env[p] = it->second;
                    continue;
                }
            }
            auto lit = eval_literal(a, st);
            if (lit) {
                Binding b;
                b.kind = Binding::Lit;
                b.lit = *lit;
                st.env[p] = b;
            } else {
                st.env.erase(p);
            }
        }
        for (const auto& [k, v] : call.kwargs) {
            auto lit = eval_literal(v, st);
            if (lit) {
                Binding b;
                b.kind = Binding::Lit;
                b.lit = *lit;
                st.env[k] = b;
            }
        }
        ++st.inline_depth;
        auto states = exec_block(def.body, std::move(st));
        // Helper bodies with branching would fork the caller here; fold
        // to the first path and note the rest.
        if (states.size() > 1) diag("branching inside inlined helper: " + def.target);
        st = std::move(states.front());
        --st.inline_depth;
        std::optional<Binding> result;
        if (st.returned) {
            result = st.returned;
            st.returned.reset();
        }
        st.env = saved_env;
        return result;
    }

    void mark_unextractable(const std::string& reason, PathState& st) {
        st.lossy = true;
        diag(reason);
    }

    // --- statement execution ----------------------------------------------------

    std::vector<PathState> exec_stmt(const pysrc::Stmt& s, PathState st) {
        switch (s.kind) {
            case pysrc::Stmt::Import:
            case pysrc::Stmt::FuncDef:
            case pysrc::Stmt::ClassDef:
            case pysrc::Stmt::Other:
                return pack(std::move(st));

            case pysrc::Stmt::Assign: {
                std::optional<Binding> b;
                if (s.value.kind == pysrc::Expr::Call) {
                    b = eval_call(st, s.value);
                } else if (s.value.kind == pysrc::Expr::Name) {
                    auto it = st.env.find(s.value.text);
                    if (it != st.env.end()) b = it->second;
                } else if (auto lit = eval_literal(s.value, st)) {
                    Binding lb;
                    lb.kind = Binding::Lit;
                    lb.lit = *lit;
                    b = lb;
                }
                if (b)
                    st.env[s.target] = *b;
                else
                    st.env.erase(s.target);
                return pack(std::move(st));
            }

            case pysrc::Stmt::ExprStmt: {
                if (s.value.kind != pysrc::Expr::Call) return pack(std::move(st));
                const pysrc::Expr& call = s.value;
                // A bare constructor statement joins the implicit chain:
                // layer listings without an explicit builder still mine.
                if (call.base && call.base->kind != pysrc::Expr::Call &&
                    call.base->kind != pysrc::Expr::Attr &&
                    is_layer_call_name(call.base->tail())) {
                    bool tensor_args = false;
                    for (const auto& a : call.args)
                        tensor_args = tensor_args || is_tensor_expr(a, st);
                    if (!tensor_args) {
                        auto raw = layer_from_call(call, st);
                        if (!raw) {
                            mark_unextractable(
                                "layer call with non-literal arguments: " + call.base->tail(),
                                st);
                            return pack(std::move(st));
                        }
                        if (st.implicit_builder < 0) {
                            st.builders.emplace_back();
                            st.implicit_builder = static_cast<int>(st.builders.size()) - 1;
                        }
                        builder_append(st, st.implicit_builder, std::move(*raw));
                        return pack(std::move(st));
                    }
                }
                eval_call(st, call);
                return pack(std::move(st));
            }

            case pysrc::Stmt::Return: {
                Binding b;
                if (s.value.kind == pysrc::Expr::Name) {
                    auto it = st.env.find(s.value.text);
                    if (it != st.env.end()) b = it->second;
                } else if (s.value.kind == pysrc::Expr::Call) {
                    auto r = eval_call(st, s.value);
                    if (r) b = *r;
                } else if (auto lit = eval_literal(s.value, st)) {
                    b.kind = Binding::Lit;
                    b.lit = *lit;
                }
                st.returned = b;
                return pack(std::move(st));
            }

            case pysrc::Stmt::For: {
                auto bound = literal_range(s.value, st);
                if (!bound) {
                    if (block_relevant(s.body))
                        mark_unextractable("loop bound is not a literal", st);
                    return pack(std::move(st));
                }
                std::vector<PathState> states = pack(std::move(st));
                for (std::int64_t v = bound->first; v < bound->second; ++v) {
                    std::vector<PathState> next;
                    for (auto& ps : states) {
                        if (!s.target.empty()) {
                            Binding b;
                            b.kind = Binding::Lit;
                            b.lit = v;
                            ps.env[s.target] = b;
                        }
                        auto outs = exec_block(s.body, std::move(ps));
                        for (auto& o : outs) next.push_back(std::move(o));
                    }
                    states = clamp_paths(std::move(next));
                }
                return states;
            }

            case pysrc::Stmt::While: {
                if (block_relevant(s.body))
                    mark_unextractable("while loop cannot be unrolled", st);
                return pack(std::move(st));
            }

            case pysrc::Stmt::With:
            case pysrc::Stmt::Try:
                return exec_block(s.body, std::move(st));

            case pysrc::Stmt::If: {
                bool relevant = false;
                for (const auto& arm : s.arms) relevant = relevant || block_relevant(arm);
                relevant = relevant || block_relevant(s.body);
                if (!relevant) return pack(std::move(st));

                std::vector<PathState> out;
                auto run_arm = [&](const std::vector<pysrc::Stmt>& arm) {
                    PathState copy = st;
                    copy.branchy = true;
                    ++copy.branch_depth;
                    auto states = exec_block(arm, std::move(copy));
                    for (auto& ps : states) {
                        --ps.branch_depth;
                        out.push_back(std::move(ps));
                    }
                };
                for (const auto& arm : s.arms) run_arm(arm);
                if (s.has_else) {
                    run_arm(s.body);
                } else {
                    PathState skip = st;
                    skip.branchy = true;
                    out.push_back(std::move(skip));
                }
                return clamp_paths(std::move(out));
            }
        }
        return pack(std::move(st));
    }

    std::optional<std::pair<std::int64_t, std::int64_t>> literal_range(
        const pysrc::Expr& iter, const PathState& st) const {
        if (iter.kind != pysrc::Expr::Call || !iter.base) return std::nullopt;
        if (iter.base->tail() != "range") return std::nullopt;
        std::vector<std::int64_t> vals;
        for (const auto& a : iter.args) {
            auto v = eval_literal(a, st);
            if (!v || !is_int(*v)) return std::nullopt;
            vals.push_back(std::get<std::int64_t>(*v));
        }
        std::int64_t lo = 0, hi = 0;
        if (vals.size() == 1) hi = vals[0];
        else if (vals.size() >= 2) { lo = vals[0]; hi = vals[1]; }
        else return std::nullopt;
        if (hi - lo > kMaxUnroll) return std::nullopt;
        return std::make_pair(lo, hi);
    }

    std::vector<PathState> pack(PathState st) {
        std::vector<PathState> v;
        v.push_back(std::move(st));
        return v;
    }

    std::vector<PathState> clamp_paths(std::vector<PathState> states) {
        if (static_cast<int>(states.size()) > kMaxPaths) {
            diag("path explosion; keeping first " + std::to_string(kMaxPaths));
            states.resize(kMaxPaths);
        }
        return states;
    }

    std::vector<PathState> exec_block(const std::vector<pysrc::Stmt>& stmts, PathState st) {
        std::vector<PathState> cur = pack(std::move(st));
        for (const auto& s : stmts) {
            std::vector<PathState> next;
            for (auto& ps : cur) {
                if (ps.returned) {
                    next.push_back(std::move(ps));
                    continue;
                }
                auto outs = exec_stmt(s, std::move(ps));
                for (auto& o : outs) next.push_back(std::move(o));
            }
            cur = clamp_paths(std::move(next));
        }
        return cur;
    }

    // --- model assembly ------------------------------------------------------

    void collect_from_block(const std::vector<pysrc::Stmt>& stmts,
                            std::vector<ExtractedModel>& out) {
        PathState root;
        auto states = exec_block(stmts, std::move(root));
        for (auto& st : states) assemble(st, out);
    }

    void assemble(PathState& st, std::vector<ExtractedModel>& out) {
        struct Piece {
            std::vector<int> node_ids;
            std::vector<Edge> sub_edges;
            std::optional<OptimizerSpec> optimizer;
            int first = 0;
        };
        std::vector<Piece> pieces;
        std::set<int> claimed;

        for (std::size_t b = 0; b < st.builders.size(); ++b) {
            const auto& chain = st.builders[b];
            if (chain.empty()) continue;
            Piece p;
            p.node_ids = chain;
            for (std::size_t i = 0; i + 1 < chain.size(); ++i)
                p.sub_edges.emplace_back(chain[i], chain[i + 1]);
            auto it = st.builder_optimizer.find(static_cast<int>(b));
            if (it != st.builder_optimizer.end()) p.optimizer = it->second;
            p.first = chain.front();
            pieces.push_back(std::move(p));
            claimed.insert(chain.begin(), chain.end());
        }

        auto pred = [&](int node) {
            std::vector<int> in;
            for (const auto& [f, t] : st.edges)
                if (t == node) in.push_back(f);
            return in;
        };
        for (const auto& decl : st.decls) {
            if (decl.source != ModelDecl::Functional) continue;
            std::vector<int> stack{decl.output_node};
            std::set<int> seen;
            while (!stack.empty()) {
                int v = stack.back();
                stack.pop_back();
                if (!seen.insert(v).second) continue;
                for (int u : pred(v)) stack.push_back(u);
            }
            Piece p;
            p.node_ids.assign(seen.begin(), seen.end());
            for (const auto& e : st.edges)
                if (seen.count(e.first) && seen.count(e.second)) p.sub_edges.push_back(e);
            p.optimizer = decl.optimizer;
            p.first = *std::min_element(p.node_ids.begin(), p.node_ids.end());
            pieces.push_back(std::move(p));
            claimed.insert(seen.begin(), seen.end());
        }

        // Residual functional components never passed to Model().
        {
            std::vector<int> comp(st.nodes.size(), -1);
            int ncomp = 0;
            for (std::size_t i = 0; i < st.nodes.size(); ++i) {
                if (comp[i] >= 0) continue;
                std::vector<int> stack{static_cast<int>(i)};
                comp[i] = ncomp;
                while (!stack.empty()) {
                    int v = stack.back();
                    stack.pop_back();
                    for (const auto& [f, t] : st.edges) {
                        if (f == v && comp[t] < 0) { comp[t] = ncomp; stack.push_back(t); }
                        if (t == v && comp[f] < 0) { comp[f] = ncomp; stack.push_back(f); }
                    }
                }
                ++ncomp;
            }
            std::set<int> claimed_comps;
            for (int c : claimed) claimed_comps.insert(comp[c]);
            for (int c = 0; c < ncomp; ++c) {
                if (claimed_comps.count(c)) continue;
                Piece p;
                for (std::size_t i = 0; i < st.nodes.size(); ++i)
                    if (comp[i] == c) p.node_ids.push_back(static_cast<int>(i));
                if (p.node_ids.empty()) continue;
                for (const auto& e : st.edges)
                    if (comp[e.first] == c) p.sub_edges.push_back(e);
                p.first = p.node_ids.front();
                pieces.push_back(std::move(p));
            }
        }

        std::sort(pieces.begin(), pieces.end(),
                  [](const Piece& a, const Piece& b) { return a.first < b.first; });

        for (auto& p : pieces) {
            std::map<int, int> remap;
            std::vector<RawLayer> raws;
            bool branch_content = false;
            std::sort(p.node_ids.begin(), p.node_ids.end());
            for (int id : p.node_ids) {
                remap[id] = static_cast<int>(raws.size());
                raws.push_back(st.nodes[id].raw);
                branch_content = branch_content || st.nodes[id].in_branch;
            }
            std::vector<Edge> edges;
            for (const auto& [f, t] : p.sub_edges) edges.emplace_back(remap[f], remap[t]);
            AbstractNeuralNetwork ann;
            try {
                ann = normalize_graph(raws, std::move(edges));
            } catch (const Error& e) {
                diag(e.what());
                continue;
            }
            if (ann.nodes.empty()) continue;
            if (!p.optimizer && !st.optimizer_events.empty())
                p.optimizer = st.optimizer_events.back();
            ann.optimizer = p.optimizer;
            ann.provenance = path_;
            ExtractedModel m;
            m.ann = std::move(ann);
            m.needs_complete = st.lossy || st.branchy || branch_content;
            out.push_back(std::move(m));
        }
    }

    void finalize(std::vector<ExtractedModel>& raw) {
        std::vector<AbstractNeuralNetwork> kept;
        for (auto& m : raw) {
            if (m.needs_complete && !is_complete(m.ann)) continue;
            bool dup = false;
            for (const auto& k : kept)
                if (ann_equal(k, m.ann) && k.optimizer == m.ann.optimizer) { dup = true; break; }
            if (!dup) kept.push_back(std::move(m.ann));
        }
        if (kept.size() > 1) {
            diag("multiple models extracted from one file");
            for (std::size_t i = 0; i < kept.size(); ++i)
                kept[i].provenance = path_ + "#" + std::to_string(i);
        }
        models = std::move(kept);
        for (const auto& r : diag_reasons_) diagnostics.push_back({path_, r});
    }
};

}  // namespace detail

struct ExtractionResult {
    std::vector<AbstractNeuralNetwork> models;
    std::vector<Diagnostic> diagnostics;
};

inline ExtractionResult extract_models_ex(const ProgramSource& src,
                                          const LayerVocabulary& vocab =
                                              LayerVocabulary::standard()) {
    ExtractionResult res;
    std::vector<pysrc::Stmt> program;
    try {
        program = pysrc::parse_program(src.text);
    } catch (const Error& e) {
        res.diagnostics.push_back({src.path, e.what()});
        return res;
    }
    detail::Extractor ex(src.path, vocab);
    ex.run(program);
    res.models = std::move(ex.models);
    res.diagnostics = std::move(ex.diagnostics);
    return res;
}

inline std::vector<AbstractNeuralNetwork> extract_models(const ProgramSource& src) {
    return extract_models_ex(src).models;
}

// The optimizer associated with the file's first model, when present.
inline std::optional<OptimizerSpec> extract_optimizer(const ProgramSource& src) {
    auto res = extract_models_ex(src);
    for (const auto& m : res.models)
        if (m.optimizer) return m.optimizer;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Corpus scan

struct MinedModel {
    AbstractNeuralNetwork ann;
};

struct MiningOutput {
    std::vector<AbstractNeuralNetwork> models;  // deduplicated survivors
    MiningReport report;
};

// Walks a directory tree of .py files, extracts, then runs the funnel:
// complete -> supported -> deduplicated. Per-file work is pure, so files
// can be processed in parallel; results merge in path order.
inline MiningOutput mine_corpus(const std::filesystem::path& root,
                                const LayerVocabulary& vocab = LayerVocabulary::standard(),
                                int jobs = 1) {
    namespace fs = std::filesystem;
    MiningOutput out;
    if (!fs::exists(root))
        throw Error(errkind::empty_dataset, "corpus directory not found: " + root.string());

    std::vector<fs::path> files;
    std::vector<std::string> notebooks;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().extension() == ".py") files.push_back(entry.path());
        if (entry.path().extension() == ".ipynb")
            notebooks.push_back(fs::relative(entry.path(), root).string());
    }
    std::sort(files.begin(), files.end());
    std::sort(notebooks.begin(), notebooks.end());
    for (const auto& nb : notebooks)
        out.report.diagnostics.push_back({nb, "notebook skipped"});

    struct FileResult {
        bool framework = false;
        ExtractionResult extraction;
    };

    auto process = [&](const fs::path& p) {
        FileResult r;
        std::string text;
        {
            std::ifstream in(p, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            text = ss.str();
        }
        ProgramSource src;
        src.path = fs::relative(p, root).generic_string();
        src.text = std::move(text);
        try {
            src = make_program_source(src.path, std::move(src.text));
        } catch (const Error& e) {
            r.extraction.diagnostics.push_back({src.path, e.what()});
            return r;
        }
        r.framework = detect_framework_program(src);
        if (r.framework) r.extraction = extract_models_ex(src, vocab);
        return r;
    };

    std::vector<FileResult> results(files.size());
    if (jobs > 1) {
        std::vector<std::future<FileResult>> futs;
        futs.reserve(files.size());
        for (const auto& f : files)
            futs.push_back(std::async(std::launch::async, process, f));
        for (std::size_t i = 0; i < futs.size(); ++i) results[i] = futs[i].get();
    } else {
        for (std::size_t i = 0; i < files.size(); ++i) results[i] = process(files[i]);
    }

    std::vector<AbstractNeuralNetwork> extracted;
    for (auto& r : results) {
        out.report.programs_scanned++;
        if (r.framework) out.report.framework_programs++;
        for (auto& m : r.extraction.models) extracted.push_back(std::move(m));
        for (auto& d : r.extraction.diagnostics)
            out.report.diagnostics.push_back(std::move(d));
    }
    out.report.models_extracted = static_cast<long>(extracted.size());

    std::vector<AbstractNeuralNetwork> complete;
    for (auto& m : extracted)
        if (is_complete(m))
            complete.push_back(std::move(m));
        else
            out.report.diagnostics.push_back({m.provenance, "incomplete model"});
    out.report.complete_models = static_cast<long>(complete.size());

    std::vector<AbstractNeuralNetwork> supported;
    for (auto& m : complete)
        if (is_supported(m, vocab))
            supported.push_back(std::move(m));
        else
            out.report.diagnostics.push_back({m.provenance, "unsupported layer"});
    out.report.supported_models = static_cast<long>(supported.size());

    out.models = dedupe(supported);
    out.report.deduped_models = static_cast<long>(out.models.size());
    return out;
}

inline nlohmann::ordered_json report_to_json(const MiningReport& r) {
    nlohmann::ordered_json j;
    j["programs_scanned"] = r.programs_scanned;
    j["framework_programs"] = r.framework_programs;
    j["models_extracted"] = r.models_extracted;
    j["complete_models"] = r.complete_models;
    j["supported_models"] = r.supported_models;
    j["deduped_models"] = r.deduped_models;
    j["diagnostics"] = nlohmann::ordered_json::array();
    for (const auto& d : r.diagnostics) j["diagnostics"].push_back({d.path, d.reason});
    return j;
}

}  // namespace nascur
