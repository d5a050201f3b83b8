"""Compare the two efficiency conventions with the quoted reference values."""
import json

from csumsim.analysis import efficiency_convention_report


def main():
    rep = efficiency_convention_report()
    for row in rep["points"]:
        print(f"g = {row['g']}, kappa_s = {row['kappa_s']} (tolerance {row['tolerance']})")
        print(f"  quoted       eta2 = {row['reference_eta2']:.4f}  eta3 = {row['reference_eta3']:.4f}")
        for conv in ("probability", "amplitude"):
            v = row[conv]
            print(f"  {conv:<12} eta2 = {v['eta2']:.5f}  eta3 = {v['eta3']:.5f}  "
                  f"matches: {json.dumps(v['matches'])}")
        print(f"  single-pass reflectance (|r1|^2 + |r0|^2)/2 = {row['single_pass_reflectance']:.5f}")
    print(f"matching convention: {rep['matching_convention'] or 'none'}")


if __name__ == "__main__":
    main()
