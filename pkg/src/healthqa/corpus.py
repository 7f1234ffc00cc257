"""Corpus ingestion and keyed document access.

Reads MEDLINE/PubMed XML or JSONL records, applies the cleaning rules
(English only, abstract present, abstract not truncated), and writes the
surviving documents to a JSONL store with a byte-offset side index:

    corpus.jsonl   one document per line, UTF-8
    corpus.idx     "pmid\\toffset" lines, sorted, for random access

Ingestion is single-writer; an opened store is immutable and safe for any
number of concurrent readers (reads use os.pread).
"""

from __future__ import annotations

import gzip
import json
import logging
import os
import re
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator
import xml.etree.ElementTree as ET

logger = logging.getLogger(__name__)

YEAR_MIN = 1800
TRUNCATION_MARKER = "(ABSTRACT TRUNCATED"

# MEDLINE declares ISO 639-2/B codes; the store keeps ISO 639-1.
_LANG_639_2_TO_1 = {
    "eng": "en", "ger": "de", "deu": "de", "fre": "fr", "fra": "fr",
    "spa": "es", "ita": "it", "por": "pt", "rus": "ru", "chi": "zh",
    "zho": "zh", "jpn": "ja", "dut": "nl", "nld": "nl", "pol": "pl",
    "kor": "ko", "swe": "sv", "dan": "da", "nor": "no", "hun": "hu",
    "cze": "cs", "ces": "cs", "tur": "tr", "ara": "ar", "heb": "he",
}

_MEDLINEDATE_YEAR = re.compile(r"\b(1[89]\d{2}|2\d{3})\b")


class RejectionReason(Enum):
    NON_ENGLISH = "NonEnglish"
    NO_ABSTRACT = "NoAbstract"
    TRUNCATED_ABSTRACT = "TruncatedAbstract"
    MALFORMED = "Malformed"


@dataclass(frozen=True)
class Rejection:
    reason: RejectionReason
    detail: str = ""
    pmid: str | None = None


@dataclass
class Document:
    """One biomedical abstract with its metadata.

    year is None when the record carried no usable publication year;
    citation_count is None until filled from the citation cache.
    """

    pmid: str
    title: str
    abstract: str
    language: str
    year: int | None = None
    citation_count: int | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "pmid": self.pmid,
                "title": self.title,
                "abstract": self.abstract,
                "language": self.language,
                "year": self.year,
                "citation_count": self.citation_count,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "Document":
        d = json.loads(line)
        return cls(
            pmid=d["pmid"],
            title=d.get("title", ""),
            abstract=d["abstract"],
            language=d["language"],
            year=d.get("year"),
            citation_count=d.get("citation_count"),
        )


@dataclass
class CorpusStats:
    """Ingestion tally; accepted + all rejected_* always equals records_seen."""

    records_seen: int = 0
    accepted: int = 0
    rejected_non_english: int = 0
    rejected_no_abstract: int = 0
    rejected_truncated_abstract: int = 0
    rejected_malformed: int = 0
    duplicate_pmids: int = field(default=0, metadata={"note": "subset of accepted"})

    def count(self, rejection: Rejection) -> None:
        attr = {
            RejectionReason.NON_ENGLISH: "rejected_non_english",
            RejectionReason.NO_ABSTRACT: "rejected_no_abstract",
            RejectionReason.TRUNCATED_ABSTRACT: "rejected_truncated_abstract",
            RejectionReason.MALFORMED: "rejected_malformed",
        }[rejection.reason]
        setattr(self, attr, getattr(self, attr) + 1)

    def as_dict(self) -> dict:
        return {
            "records_seen": self.records_seen,
            "accepted": self.accepted,
            "rejected_non_english": self.rejected_non_english,
            "rejected_no_abstract": self.rejected_no_abstract,
            "rejected_truncated_abstract": self.rejected_truncated_abstract,
            "rejected_malformed": self.rejected_malformed,
            "duplicate_pmids": self.duplicate_pmids,
        }


def _normalize_language(raw: str | None) -> str:
    if not raw:
        return "unknown"
    code = raw.strip().lower()
    if len(code) == 2:
        return code
    return _LANG_639_2_TO_1.get(code, code or "unknown")


def _clean_year(value) -> int | None:
    """Coerce to int and bound-check; out-of-range years are treated as absent."""
    if value is None:
        return None
    try:
        year = int(value)
    except (TypeError, ValueError):
        return None
    if YEAR_MIN <= year <= date.today().year + 1:
        return year
    return None


def _validate(doc: Document) -> Document | Rejection:
    # Rule order follows the cleaning pipeline: language, presence, completeness.
    if doc.language != "en":
        return Rejection(RejectionReason.NON_ENGLISH, doc.language, doc.pmid)
    if not doc.abstract.strip():
        return Rejection(RejectionReason.NO_ABSTRACT, pmid=doc.pmid)
    if TRUNCATION_MARKER in doc.abstract:
        return Rejection(RejectionReason.TRUNCATED_ABSTRACT, pmid=doc.pmid)
    return doc


def _element_text(elem: ET.Element | None) -> str:
    if elem is None:
        return ""
    return "".join(elem.itertext()).strip()


def parse_xml_record(elem: ET.Element) -> Document | Rejection:
    """Parse one <PubmedArticle>/<MedlineCitation> element.

    Multiple AbstractText sections are joined with single spaces; a section's
    Label attribute is kept as leading text ("CONCLUSIONS: ..."). The year
    comes from PubDate/Year, falling back to the first plausible 4-digit
    number in MedlineDate.
    """
    pmid_elem = elem.find(".//PMID")
    pmid = _element_text(pmid_elem)
    if not pmid:
        return Rejection(RejectionReason.MALFORMED, "missing PMID")

    title = _element_text(elem.find(".//ArticleTitle"))

    parts = []
    for section in elem.findall(".//Abstract/AbstractText"):
        text = _element_text(section)
        if not text:
            continue
        label = (section.get("Label") or "").strip()
        parts.append(f"{label}: {text}" if label else text)
    abstract = " ".join(parts)

    language = _normalize_language(_element_text(elem.find(".//Language")) or None)

    year = _clean_year(_element_text(elem.find(".//PubDate/Year")) or None)
    if year is None:
        medline_date = _element_text(elem.find(".//PubDate/MedlineDate"))
        m = _MEDLINEDATE_YEAR.search(medline_date)
        if m:
            year = _clean_year(m.group(0))

    return _validate(Document(pmid=pmid, title=title, abstract=abstract,
                              language=language, year=year))


def parse_jsonl_record(line: str) -> Document | Rejection:
    """Parse one JSONL record with keys {pmid, title, abstract, language, year}."""
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as e:
        return Rejection(RejectionReason.MALFORMED, f"bad JSON: {e}")
    if not isinstance(raw, dict):
        return Rejection(RejectionReason.MALFORMED, "record is not an object")
    pmid = str(raw.get("pmid") or "").strip()
    if not pmid:
        return Rejection(RejectionReason.MALFORMED, "missing pmid")
    doc = Document(
        pmid=pmid,
        title=str(raw.get("title") or ""),
        abstract=str(raw.get("abstract") or ""),
        language=_normalize_language(raw.get("language")),
        year=_clean_year(raw.get("year")),
    )
    return _validate(doc)


def parse_record(raw_record: str | ET.Element) -> Document | Rejection:
    """Parse a record in either input format (XML fragment or JSONL line)."""
    if isinstance(raw_record, ET.Element):
        return parse_xml_record(raw_record)
    stripped = raw_record.lstrip()
    if stripped.startswith("<"):
        try:
            return parse_xml_record(ET.fromstring(raw_record))
        except ET.ParseError as e:
            return Rejection(RejectionReason.MALFORMED, f"bad XML: {e}")
    return parse_jsonl_record(raw_record)


def _open_maybe_gzip(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return path.open("rb")


def _iter_records(path: Path) -> Iterator[Document | Rejection]:
    """Stream parsed records from one input file, sniffing the format."""
    with _open_maybe_gzip(path) as probe:
        head = probe.read(256).lstrip()
    is_xml = head.startswith(b"<")
    if is_xml:
        # iterparse keeps memory flat on full-size MEDLINE files
        with _open_maybe_gzip(path) as f:
            for _, elem in ET.iterparse(f, events=("end",)):
                if elem.tag in ("PubmedArticle", "MedlineCitation"):
                    yield parse_xml_record(elem)
                    elem.clear()
    else:
        with _open_maybe_gzip(path) as f:
            for raw in f:
                line = raw.decode("utf-8")
                if line.strip():
                    yield parse_jsonl_record(line)


def idx_path_for(store_path: str | Path) -> Path:
    return Path(store_path).with_suffix(".idx")


def ingest(input_paths: Iterable[str | Path], store_path: str | Path) -> CorpusStats:
    """Ingest input files into a fresh store at store_path.

    Re-ingesting a pmid overwrites: the offset index points at the last
    accepted record for each pmid. Unreadable input aborts with the
    underlying OSError; malformed records are counted, not fatal.
    """
    store_path = Path(store_path)
    store_path.parent.mkdir(parents=True, exist_ok=True)
    stats = CorpusStats()
    offsets: dict[str, int] = {}

    with store_path.open("w", encoding="utf-8") as out:
        position = 0
        for path in input_paths:
            for parsed in _iter_records(Path(path)):
                stats.records_seen += 1
                if isinstance(parsed, Rejection):
                    stats.count(parsed)
                    continue
                stats.accepted += 1
                if parsed.pmid in offsets:
                    stats.duplicate_pmids += 1
                line = parsed.to_json() + "\n"
                out.write(line)
                offsets[parsed.pmid] = position
                position += len(line.encode("utf-8"))

    with idx_path_for(store_path).open("w", encoding="utf-8") as idx:
        for pmid in sorted(offsets):
            idx.write(f"{pmid}\t{offsets[pmid]}\n")

    logger.info("ingest: %s", stats.as_dict())
    return stats


class DocumentNotFound(KeyError):
    pass


class CorpusStore:
    """Read-only view over an ingested corpus.jsonl + corpus.idx pair."""

    def __init__(self, store_path: str | Path):
        self.path = Path(store_path)
        self._offsets: dict[str, int] = {}
        with idx_path_for(self.path).open("r", encoding="utf-8") as idx:
            for line in idx:
                pmid, _, offset = line.rstrip("\n").partition("\t")
                self._offsets[pmid] = int(offset)
        self._fd = os.open(str(self.path), os.O_RDONLY)
        self._overrides: dict[str, Document] = {}

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1

    def __enter__(self) -> "CorpusStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __len__(self) -> int:
        return len(self._offsets)

    def __contains__(self, pmid: str) -> bool:
        return pmid in self._offsets

    def pmids(self) -> list[str]:
        return sorted(self._offsets)

    def get(self, pmid: str) -> Document:
        if pmid in self._overrides:
            return self._overrides[pmid]
        try:
            offset = self._offsets[pmid]
        except KeyError:
            raise DocumentNotFound(pmid) from None
        chunk = b""
        pos = offset
        while True:
            block = os.pread(self._fd, 1 << 16, pos)
            if not block:
                break
            nl = block.find(b"\n")
            if nl >= 0:
                chunk += block[:nl]
                break
            chunk += block
            pos += len(block)
        return Document.from_json(chunk.decode("utf-8"))

    def __iter__(self) -> Iterator[Document]:
        for pmid in self.pmids():
            yield self.get(pmid)

    def annotate_citations(self, counts: dict[str, int | None]) -> None:
        """Attach citation counts in memory (the store file is never rewritten)."""
        for pmid, count in counts.items():
            if pmid in self._offsets:
                doc = self.get(pmid)
                doc.citation_count = count
                self._overrides[pmid] = doc
