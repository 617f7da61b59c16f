#include "noiselab/text.hpp"

#include <array>
#include <utility>

#include "noiselab/error.hpp"

namespace noiselab::text {

std::u32string decode_utf8(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        char32_t cp = 0;
        size_t len = 0;
        if (b0 < 0x80) {
            cp = b0;
            len = 1;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            len = 2;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            len = 3;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            len = 4;
        } else {
            throw Utf8Error("invalid UTF-8 lead byte at offset " + std::to_string(i));
        }
        if (i + len > s.size()) throw Utf8Error("truncated UTF-8 sequence at offset " + std::to_string(i));
        for (size_t k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) throw Utf8Error("invalid UTF-8 continuation at offset " + std::to_string(i + k));
            cp = (cp << 6) | (b & 0x3F);
        }
        static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
        if (len > 1 && cp < kMin[len]) throw Utf8Error("overlong UTF-8 sequence at offset " + std::to_string(i));
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
            throw Utf8Error("invalid codepoint at offset " + std::to_string(i));
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string encode_utf8(char32_t c) {
    std::string out;
    if (c < 0x80) {
        out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (c >> 6)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (c >> 12)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (c >> 18)));
        out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
    return out;
}

std::string encode_utf8(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t c : s) out += encode_utf8(c);
    return out;
}

bool is_letter(char32_t c) {
    if ((c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z')) return true;
    // Latin-1 Supplement letters, excluding multiplication/division signs.
    if (c >= 0xC0 && c <= 0xFF) return c != 0xD7 && c != 0xF7;
    // Latin Extended-A.
    if (c >= 0x100 && c <= 0x17F) return true;
    return false;
}

bool is_space(char32_t c) {
    switch (c) {
        case U' ':
        case U'\t':
        case U'\n':
        case U'\r':
        case U'\v':
        case U'\f':
        case 0xA0:    // no-break space
        case 0x2028:  // line separator
        case 0x2029:  // paragraph separator
        case 0x3000:  // ideographic space
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

bool is_punct(char32_t c) {
    if (c < 0x80) {
        return (c >= U'!' && c <= U'/') || (c >= U':' && c <= U'@') ||
               (c >= U'[' && c <= U'`') || (c >= U'{' && c <= U'~');
    }
    switch (c) {
        case 0x2010:
        case 0x2011:
        case 0x2012:
        case 0x2013:  // en dash
        case 0x2014:  // em dash
        case 0x2018:
        case 0x2019:
        case 0x201C:
        case 0x201D:
        case 0x2026:  // ellipsis
        case 0xA1:    // inverted exclamation
        case 0xBF:    // inverted question
        case 0xAB:
        case 0xBB:    // guillemets
            return true;
        default:
            return false;
    }
}

char32_t to_lower(char32_t c) {
    if (c >= U'A' && c <= U'Z') return c + 0x20;
    // Latin-1 Supplement uppercase block (except the multiplication sign).
    if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
    if (c >= 0x100 && c <= 0x177) {
        // Alternating case pairs; two irregular sub-ranges.
        if (c <= 0x137) return (c % 2 == 0) ? c + 1 : c;
        if (c <= 0x148) return (c % 2 == 1) ? c + 1 : c;
        if (c >= 0x14A) return (c % 2 == 0) ? c + 1 : c;
        return c;
    }
    if (c == 0x178) return 0xFF;  // Y with diaeresis
    if (c == 0x179 || c == 0x17B || c == 0x17D) return c + 1;
    return c;
}

namespace {

// Composition table for the combining marks common in Latin-script text.
// Covers the Latin-1 precomposed range; pairs outside the table pass
// through unchanged.
char32_t compose(char32_t base, char32_t mark) {
    struct Entry {
        char32_t mark;
        const char* bases;
        const char32_t* composed;
    };
    static constexpr char32_t kGrave[] = {0xE0, 0xE8, 0xEC, 0xF2, 0xF9, 0xC0, 0xC8, 0xCC, 0xD2, 0xD9};
    static constexpr char32_t kAcute[] = {0xE1, 0xE9, 0xED, 0xF3, 0xFA, 0xC1, 0xC9, 0xCD, 0xD3, 0xDA};
    static constexpr char32_t kCirc[] = {0xE2, 0xEA, 0xEE, 0xF4, 0xFB, 0xC2, 0xCA, 0xCE, 0xD4, 0xDB};
    static constexpr char32_t kDiaer[] = {0xE4, 0xEB, 0xEF, 0xF6, 0xFC, 0xC4, 0xCB, 0xCF, 0xD6, 0xDC};
    static const Entry kTable[] = {
        {0x300, "aeiouAEIOU", kGrave},
        {0x301, "aeiouAEIOU", kAcute},
        {0x302, "aeiouAEIOU", kCirc},
        {0x308, "aeiouAEIOU", kDiaer},
    };
    for (const auto& e : kTable) {
        if (e.mark != mark) continue;
        for (size_t i = 0; e.bases[i]; ++i) {
            if (static_cast<char32_t>(e.bases[i]) == base) return e.composed[i];
        }
    }
    switch (mark) {
        case 0x303:  // tilde
            if (base == U'n') return 0xF1;
            if (base == U'N') return 0xD1;
            if (base == U'a') return 0xE3;
            if (base == U'A') return 0xC3;
            if (base == U'o') return 0xF5;
            if (base == U'O') return 0xD5;
            break;
        case 0x30A:  // ring above
            if (base == U'a') return 0xE5;
            if (base == U'A') return 0xC5;
            break;
        case 0x308:
            if (base == U'y') return 0xFF;
            if (base == U'Y') return 0x178;
            break;
        default:
            break;
    }
    return 0;
}

bool is_combining_mark(char32_t c) {
    return c >= 0x300 && c <= 0x36F;
}

}  // namespace

std::string normalize(std::string_view s) {
    std::u32string cps = decode_utf8(s);

    // Compose combining marks with the preceding base character.
    std::u32string composed;
    composed.reserve(cps.size());
    for (char32_t c : cps) {
        if (!composed.empty() && is_combining_mark(c)) {
            if (char32_t merged = compose(composed.back(), c); merged != 0) {
                composed.back() = merged;
                continue;
            }
        }
        composed.push_back(c);
    }

    std::u32string out;
    out.reserve(composed.size());
    bool pending_space = false;
    for (char32_t c : composed) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(U' ');
            pending_space = false;
        }
        out.push_back(to_lower(c));
    }
    return encode_utf8(out);
}

std::vector<Span> segment_words(std::u32string_view s) {
    std::vector<Span> spans;
    size_t i = 0;
    while (i < s.size()) {
        if (!is_letter(s[i])) {
            ++i;
            continue;
        }
        size_t begin = i;
        while (i < s.size() && is_letter(s[i])) ++i;
        spans.push_back({begin, i});
    }
    return spans;
}

std::vector<Span> segment_words_utf8(std::string_view s) {
    return segment_words(decode_utf8(s));
}

std::vector<std::string> split_fields(std::string_view s) {
    std::vector<std::string> fields;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == ' ') {
            fields.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    if (s.empty()) fields.clear();
    return fields;
}

}  // namespace noiselab::text
