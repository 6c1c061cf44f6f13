#include "core/prompts.hpp"

#include "core/types.hpp"

namespace gems {

namespace detail {
const std::map<std::string, std::string>& embedded_prompts();
}

namespace {

std::string trim_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

std::string render_line(std::string_view line, const PromptSlots& slots, bool& keep) {
  std::string out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const auto open = line.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = line.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(line.substr(pos, open - pos));
    const std::string name(line.substr(open + 2, close - open - 2));
    auto it = slots.find(name);
    const std::string value = it == slots.end() ? std::string() : trim_trailing_newlines(it->second);
    if (value.empty()) {
      keep = false;
      return {};
    }
    if (value.find('\n') != std::string::npos) {
      if (!out.empty() && out.back() == ' ') out.pop_back();
      if (!out.empty()) out += '\n';
    }
    out += value;
    pos = close + 2;
  }
  out.append(line.substr(pos));
  return out;
}

}  // namespace

std::string render_template(std::string_view text, const PromptSlots& slots) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    bool keep = true;
    auto rendered = render_line(line, slots, keep);
    if (keep) {
      out += rendered;
      if (nl < text.size()) out += '\n';
    }
    if (nl == text.size()) break;
    pos = nl + 1;
  }
  return out;
}

const std::string& prompt_template(std::string_view stage) {
  const auto& all = detail::embedded_prompts();
  auto it = all.find(std::string(stage));
  if (it == all.end()) throw Error(ErrorKind::InvalidArgument, "no prompt template for stage '" + std::string(stage) + "'");
  return it->second;
}

RenderedPrompt render_prompt(std::string_view stage, const PromptSlots& slots) {
  const std::string& text = prompt_template(stage);
  const auto sys = text.find("[system]\n");
  const auto usr = text.find("[user]\n");
  if (sys == std::string::npos || usr == std::string::npos || usr < sys)
    throw Error(ErrorKind::InvalidArgument, "prompt template '" + std::string(stage) + "' lacks [system]/[user] sections");
  RenderedPrompt p;
  p.system = trim_trailing_newlines(render_template(text.substr(sys + 9, usr - sys - 9), slots));
  p.user = trim_trailing_newlines(render_template(text.substr(usr + 7), slots));
  return p;
}

}  // namespace gems
