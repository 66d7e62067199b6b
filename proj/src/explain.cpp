#include "itm/explain.hpp"

#include "itm/error.hpp"
#include "itm/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace itm {

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string class_name(const LinearModel& m, int c) {
    return c < static_cast<int>(m.class_names.size()) ? m.class_names[static_cast<std::size_t>(c)]
                                                      : "class-" + std::to_string(c);
}

}  // namespace

std::vector<std::string> descriptor_names(const LinearModel& model) {
    std::vector<std::string> names;
    std::map<std::string, int> seen;
    for (Eigen::Index j = 0; j < model.num_descriptors(); ++j) {
        if (j < static_cast<Eigen::Index>(model.descriptors.size()))
            names.push_back(model.descriptors[static_cast<std::size_t>(j)].name);
        else
            names.push_back("descriptor-" + std::to_string(j));
        ++seen[names.back()];
    }
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (seen[names[j]] > 1) {
            const int id = j < model.descriptors.size() ? model.descriptors[j].cluster_id : static_cast<int>(j);
            names[j] += " #" + std::to_string(id);
        }
    }
    return names;
}

std::string GlobalExplanation::sankey_csv() const {
    std::string out = "source,target,value\n";
    for (const auto& e : edges)
        out += csv_field(e.descriptor) + "," + csv_field(e.class_name) + "," + format_number(e.weight) + "\n";
    return out;
}

GlobalExplanation global_explanation(const LinearModel& model) {
    GlobalExplanation g;
    const auto names = descriptor_names(model);
    for (Eigen::Index j = 0; j < model.num_descriptors(); ++j) {
        for (Eigen::Index c = 0; c < model.num_classes(); ++c) {
            GlobalEdge e;
            e.descriptor = names[static_cast<std::size_t>(j)];
            e.class_name = class_name(model, static_cast<int>(c));
            e.weight = model.weights(c, j);
            if (j < static_cast<Eigen::Index>(model.descriptors.size()))
                e.privacy_score = model.descriptors[static_cast<std::size_t>(j)].privacy_score;
            g.edges.push_back(std::move(e));
        }
    }
    return g;
}

LocalExplanation local_explanation(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& v, int top_k,
                                   std::string image_id, std::optional<int> truth, bool all_classes) {
    const Prediction p = predict(model, v);
    LocalExplanation out;
    out.image_id = std::move(image_id);
    out.predicted = p.label;
    out.truth = truth;
    out.logits = p.logits;

    const auto names = descriptor_names(model);
    auto make = [&](Eigen::Index j, int c) {
        Contribution k;
        k.descriptor = static_cast<int>(j);
        k.name = names[static_cast<std::size_t>(j)];
        if (j < static_cast<Eigen::Index>(model.descriptors.size())) {
            const auto& d = model.descriptors[static_cast<std::size_t>(j)];
            k.words = d.text();
            k.privacy_score = d.privacy_score;
        }
        k.class_index = c;
        k.score = v[j];
        k.weight = model.weights(c, j);
        k.value = k.score * k.weight;
        return k;
    };

    for (int c = 0; c < model.num_classes(); ++c) {
        if (!all_classes && c != p.label) continue;
        for (Eigen::Index j = 0; j < model.num_descriptors(); ++j) out.contributions.push_back(make(j, c));
    }
    std::stable_sort(out.contributions.begin(), out.contributions.end(), [](const Contribution& a, const Contribution& b) {
        const double fa = std::abs(a.value), fb = std::abs(b.value);
        if (fa != fb) return fa > fb;
        if (a.descriptor != b.descriptor) return a.descriptor < b.descriptor;
        return a.class_index < b.class_index;
    });

    std::vector<Contribution> own;
    for (Eigen::Index j = 0; j < model.num_descriptors(); ++j) own.push_back(make(j, p.label));
    std::vector<Contribution> pos, neg;
    for (const auto& k : own) {
        if (k.value > 0.0) pos.push_back(k);
        if (k.value < 0.0) neg.push_back(k);
    }
    std::stable_sort(pos.begin(), pos.end(), [](const auto& a, const auto& b) { return a.value > b.value; });
    std::stable_sort(neg.begin(), neg.end(), [](const auto& a, const auto& b) { return a.value < b.value; });
    if (static_cast<int>(pos.size()) > top_k) pos.resize(static_cast<std::size_t>(top_k));
    if (static_cast<int>(neg.size()) > top_k) neg.resize(static_cast<std::size_t>(top_k));
    out.top_positive = std::move(pos);
    out.top_negative = std::move(neg);
    return out;
}

namespace {

Json contribution_json(const Contribution& k, const LinearModel& m) {
    Json j;
    j["descriptor"] = k.name;
    j["words"] = k.words;
    j["class"] = class_name(m, k.class_index);
    j["score"] = k.score;
    j["weight"] = k.weight;
    j["contribution"] = k.value;
    j["P_j"] = k.privacy_score ? Json(*k.privacy_score) : Json(nullptr);
    return j;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

void render_report(const std::vector<LocalExplanation>& explanations, const LinearModel& model,
                   const std::filesystem::path& json_path) {
    Json doc;
    doc["report"] = "itm local explanations";
    doc["classes"] = model.class_names;
    Json images = Json::array();
    std::string text = "image\tpredicted\ttruth\tdescriptor\tP_j\tcontribution\tsign\twords\n";

    for (const auto& e : explanations) {
        Json j;
        j["image_id"] = e.image_id;
        j["predicted"] = class_name(model, e.predicted);
        j["truth"] = e.truth ? Json(class_name(model, *e.truth)) : Json(nullptr);
        Json logits = Json::array();
        for (Eigen::Index c = 0; c < e.logits.size(); ++c) logits.push_back(e.logits[c]);
        j["logits"] = logits;
        Json pos = Json::array(), neg = Json::array(), all = Json::array();
        for (const auto& k : e.top_positive) pos.push_back(contribution_json(k, model));
        for (const auto& k : e.top_negative) neg.push_back(contribution_json(k, model));
        for (const auto& k : e.contributions) all.push_back(contribution_json(k, model));
        j["top_positive"] = pos;
        j["top_negative"] = neg;
        j["contributions"] = all;
        images.push_back(j);

        const std::string truth = e.truth ? class_name(model, *e.truth) : "-";
        for (const auto* list : {&e.top_positive, &e.top_negative}) {
            for (const auto& k : *list) {
                text += e.image_id + "\t" + class_name(model, e.predicted) + "\t" + truth + "\t" + k.name + "\t" +
                        (k.privacy_score ? fixed(*k.privacy_score, 2) : std::string("-")) + "\t" + fixed(k.value, 4) +
                        "\t" + (k.value >= 0.0 ? "+" : "-") + "\t" + k.words + "\n";
            }
        }
    }
    doc["images"] = images;

    auto text_path = json_path;
    text_path.replace_extension(".txt");
    write_json(json_path, doc);
    write_text(text_path, text);
}

}  // namespace itm
