"""Public suffix list matching (plain, ``*.`` wildcard and ``!`` exception rules)."""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Optional, Union


def normalize_domain(domain: str) -> str:
    return domain.strip().rstrip(".").lower()


class PublicSuffixList:
    def __init__(self, rules: Iterable[str] = ()):
        self.plain: set[str] = set()
        self.wildcard: set[str] = set()  # stored without the leading "*."
        self.exceptions: set[str] = set()  # stored without the leading "!"
        for rule in rules:
            self.add_rule(rule)

    def add_rule(self, rule: str):
        rule = rule.strip().lower()
        if not rule or rule.startswith("//"):
            return
        rule = rule.split()[0]
        if rule.startswith("!"):
            self.exceptions.add(rule[1:])
        elif rule.startswith("*."):
            self.wildcard.add(rule[2:])
        else:
            self.plain.add(rule)

    @classmethod
    def parse(cls, text: str) -> "PublicSuffixList":
        return cls(text.splitlines())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PublicSuffixList":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def suffix_labels(self, labels: list[str]) -> int:
        """How many trailing labels of ``labels`` form the public suffix."""
        best = 1  # the implicit "*" rule: an unknown TLD is a suffix on its own
        for n in range(1, len(labels) + 1):
            tail = ".".join(labels[-n:])
            if tail in self.exceptions:
                return n - 1
            if tail in self.plain:
                best = max(best, n)
            if n < len(labels) and tail in self.wildcard:
                best = max(best, n + 1)
        return best

    def public_suffix(self, domain: str) -> str:
        labels = normalize_domain(domain).split(".")
        return ".".join(labels[-self.suffix_labels(labels):])

    def split(self, domain: str) -> tuple[str, str]:
        """``(left part, public suffix)``; the left part is ``""`` when the domain is a suffix."""
        labels = normalize_domain(domain).split(".")
        n = min(self.suffix_labels(labels), len(labels))
        return ".".join(labels[:-n]), ".".join(labels[-n:])

    def registrable_domain(self, domain: str) -> Optional[str]:
        """Public suffix plus one label, or ``None`` for a bare suffix."""
        labels = normalize_domain(domain).split(".")
        n = self.suffix_labels(labels)
        if len(labels) <= n:
            return None
        return ".".join(labels[-(n + 1):])
