"""Write a GeoNames cities-format dump for the four target countries.

The rows come from the cities15000 table shipped with the ``geonamescache``
package (a GeoNames snapshot).  Alternate names are left empty; the ascii
name column is produced by accent folding, as GeoNames does.

    python scripts/make_geonames_export.py tests/fixtures/geonames/cities15000_4c.txt
"""

import sys
import unicodedata

import geonamescache

COUNTRIES = ("US", "CN", "GB", "CA")


def ascii_fold(name):
    name = name.replace("\u2013", "-").replace("\u2014", "-")
    return unicodedata.normalize("NFKD", name).encode("ascii", "ignore").decode("ascii")


def main(out_path):
    cities = geonamescache.GeonamesCache().get_cities().values()
    rows = sorted(
        (c for c in cities if c["countrycode"] in COUNTRIES),
        key=lambda c: c["geonameid"],
    )
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        for c in rows:
            fields = [
                str(c["geonameid"]), c["name"], ascii_fold(c["name"]), "",
                f"{c['latitude']:.5f}", f"{c['longitude']:.5f}", "P", "PPL",
                c["countrycode"], "", c["admin1code"], "", "", "",
                str(c["population"]), "", "", c["timezone"], "",
            ]
            fh.write("\t".join(fields) + "\n")
    print(f"wrote {len(rows)} rows to {out_path}")


if __name__ == "__main__":
    main(sys.argv[1])
