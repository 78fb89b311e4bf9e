#!/usr/bin/env python3
"""Populate data/ with the public benchmark tables.

Adult and Telco Customer Churn are extracted from PyPI distributions that
vendor them; Bank Marketing (bank-full.csv) is not redistributed on PyPI
and has to be downloaded from the UCI repository by hand.
"""
import io
import re
import sys
import tarfile
import urllib.request
import zipfile
from urllib.parse import urljoin
from pathlib import Path

SOURCES = [
    ("fairness", "fairness-0.1.8.tar.gz", "fairness-0.1.8/fairness/data/raw/adult.csv", "adult.csv"),
    ("evalml", "evalml-0.84.0-py3-none-any.whl", "evalml/demos/data/churn.csv", "Telco-Customer-Churn.csv"),
]


def fetch(package, filename):
    index_url = f"https://pypi.org/simple/{package}/"
    index = urllib.request.urlopen(index_url).read().decode()
    for href in re.findall(r'href="([^"]+)"', index):
        if href.split("#")[0].endswith("/" + filename):
            return urllib.request.urlopen(urljoin(index_url, href.split("#")[0])).read()
    raise SystemExit(f"{filename} not listed at {index_url}")


def extract(filename, blob, member):
    if filename.endswith(".whl"):
        return zipfile.ZipFile(io.BytesIO(blob)).read(member)
    with tarfile.open(fileobj=io.BytesIO(blob)) as tar:
        return tar.extractfile(member).read()


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data"
    out.mkdir(parents=True, exist_ok=True)
    for package, filename, member, name in SOURCES:
        target = out / name
        if target.exists():
            print(f"{target} exists, skipping")
            continue
        blob = fetch(package, filename)
        target.write_bytes(extract(filename, blob, member))
        print(f"wrote {target} from {filename}")
    if not (out / "bank-full.csv").exists():
        print("bank-full.csv missing: download bank.zip from the UCI Bank Marketing page and unpack it here")


if __name__ == "__main__":
    main()
