//! Schemas for the KDD Cup 99, NSL-KDD and Kyoto 2006+ record layouts.

use std::collections::BTreeMap;

use super::{ClassId, FeatureSchema, FeatureSpec, UnknownLabelPolicy};

const KDD_FEATURES: [&str; 41] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

pub const NORMAL: ClassId = 1;
pub const DOS: ClassId = 2;
pub const PROBE: ClassId = 3;
pub const U2R: ClassId = 4;
pub const R2L: ClassId = 5;

const DOS_ATTACKS: [&str; 6] = ["back", "neptune", "land", "pod", "smurf", "teardrop"];
const PROBE_ATTACKS: [&str; 4] = ["ipsweep", "nmap", "portsweep", "satan"];
const U2R_ATTACKS: [&str; 4] = ["buffer_overflow", "loadmodule", "rootkit", "perl"];
const R2L_ATTACKS: [&str; 8] = [
    "ftp_write",
    "guess_passwd",
    "imap",
    "multihop",
    "phf",
    "spy",
    "warezclient",
    "warezmaster",
];

const PROTOCOL_CODES: [(&str, u32); 3] = [("tcp", 1), ("udp", 2), ("icmp", 3)];

fn kdd_features() -> Vec<FeatureSpec> {
    KDD_FEATURES
        .iter()
        .map(|&name| match name {
            "protocol_type" => FeatureSpec::categorical(name).with_codes(&PROTOCOL_CODES),
            "service" | "flag" => FeatureSpec::categorical(name),
            _ => FeatureSpec::continuous(name),
        })
        .collect()
}

fn kdd_label_map() -> BTreeMap<String, ClassId> {
    let mut map = BTreeMap::from([("normal".to_string(), NORMAL)]);
    for (attacks, class) in [
        (&DOS_ATTACKS[..], DOS),
        (&PROBE_ATTACKS[..], PROBE),
        (&U2R_ATTACKS[..], U2R),
        (&R2L_ATTACKS[..], R2L),
    ] {
        map.extend(attacks.iter().map(|a| (a.to_string(), class)));
    }
    map
}

fn kdd_class_names() -> BTreeMap<ClassId, String> {
    [(NORMAL, "normal"), (DOS, "dos"), (PROBE, "probe"), (U2R, "u2r"), (R2L, "r2l")]
        .into_iter()
        .map(|(c, n)| (c, n.to_string()))
        .collect()
}

/// KDD Cup 99: 41 features plus the label. Attack types outside the four
/// categories (present only in the `corrected` test file) are dropped.
pub fn kdd99() -> FeatureSchema {
    FeatureSchema {
        name: "kdd99".into(),
        delimiter: ',',
        has_header: false,
        features: kdd_features(),
        label_column: 41,
        skip_columns: Vec::new(),
        label_map: kdd_label_map(),
        class_names: kdd_class_names(),
        unknown_labels: UnknownLabelPolicy::Drop,
        sd_exclusions: vec!["src_bytes".into(), "dst_bytes".into()],
    }
}

/// NSL-KDD: the KDD layout followed by a difficulty-level column.
pub fn nsl_kdd() -> FeatureSchema {
    FeatureSchema {
        name: "nsl_kdd".into(),
        skip_columns: vec![42],
        ..kdd99()
    }
}

/// Kyoto 2006+ daily traffic files: 24 tab-separated columns, the 18th
/// being the label (1 normal, -1 known attack, -2 unknown attack).
pub fn kyoto2006() -> FeatureSchema {
    use FeatureSpec as F;
    let features = vec![
        F::continuous("duration"),
        F::categorical("service"),
        F::continuous("src_bytes"),
        F::continuous("dst_bytes"),
        F::continuous("count"),
        F::continuous("same_srv_rate"),
        F::continuous("serror_rate"),
        F::continuous("srv_serror_rate"),
        F::continuous("dst_host_count"),
        F::continuous("dst_host_srv_count"),
        F::continuous("dst_host_same_src_port_rate"),
        F::continuous("dst_host_serror_rate"),
        F::continuous("dst_host_srv_serror_rate"),
        F::categorical("flag"),
        F::categorical("ids_detection"),
        F::categorical("malware_detection"),
        F::categorical("ashula_detection"),
        F::categorical("source_ip"),
        F::continuous("source_port"),
        F::categorical("destination_ip"),
        F::continuous("destination_port"),
        F::categorical("start_time"),
        F::categorical("protocol").with_codes(&PROTOCOL_CODES),
    ];
    FeatureSchema {
        name: "kyoto2006".into(),
        delimiter: '\t',
        has_header: false,
        features,
        label_column: 17,
        skip_columns: Vec::new(),
        label_map: BTreeMap::from([
            ("1".to_string(), 1),
            ("-1".to_string(), 2),
            ("-2".to_string(), 3),
        ]),
        class_names: BTreeMap::from([
            (1, "normal".to_string()),
            (2, "known_attack".to_string()),
            (3, "unknown_attack".to_string()),
        ]),
        unknown_labels: UnknownLabelPolicy::Error,
        sd_exclusions: vec!["src_bytes".into(), "dst_bytes".into()],
    }
}

/// Looks up a built-in schema by token (`kdd99`, `nslkdd`, `kyoto`).
pub fn by_name(token: &str) -> Option<FeatureSchema> {
    match token {
        "kdd99" | "kdd" => Some(kdd99()),
        "nslkdd" | "nsl_kdd" | "nsl-kdd" => Some(nsl_kdd()),
        "kyoto" | "kyoto2006" => Some(kyoto2006()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for schema in [kdd99(), nsl_kdd(), kyoto2006()] {
            schema.validate().unwrap();
        }
        assert_eq!(kdd99().n_columns(), 42);
        assert_eq!(nsl_kdd().n_columns(), 43);
        assert_eq!(kyoto2006().n_columns(), 24);
        assert_eq!(kdd99().feature_columns(), (0..41).collect::<Vec<_>>());
    }

    #[test]
    fn kdd_attack_categories() {
        let map = kdd_label_map();
        assert_eq!(map["neptune"], DOS);
        assert_eq!(map["satan"], PROBE);
        assert_eq!(map["perl"], U2R);
        assert_eq!(map["warezmaster"], R2L);
        assert_eq!(map.len(), 23);
    }

    #[test]
    fn sd_exclusions_resolve_by_name() {
        let idx: Vec<usize> = kdd99().sd_exclusion_indices().unwrap().into_iter().collect();
        assert_eq!(idx, vec![4, 5]);
        let idx: Vec<usize> = kyoto2006().sd_exclusion_indices().unwrap().into_iter().collect();
        assert_eq!(idx, vec![2, 3]);
    }

    #[test]
    fn schema_json_round_trip() {
        let schema = kyoto2006();
        assert_eq!(FeatureSchema::from_json(&schema.to_json()).unwrap(), schema);
    }
}
