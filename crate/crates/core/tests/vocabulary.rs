use std::str::FromStr;

use proptest::prelude::*;
use uuis_core::{AssetState, PermissionAction, RequestStatus, UnitKind};

const VOCABULARY: [&str; 28] = [
    "request:create",
    "request:list",
    "request:show",
    "request:edit",
    "request:approve",
    "asset:create",
    "asset:list",
    "asset:show",
    "asset:edit",
    "location:create",
    "location:list",
    "location:show",
    "location:edit",
    "location:delete",
    "universityPart:create",
    "universityPart:list",
    "universityPart:show",
    "universityPart:edit",
    "universityPart:delete",
    "search:simple",
    "search:advanced",
    "report:list",
    "report:show",
    "user:list",
    "user:show",
    "user:edit",
    "audit:list",
    "audit:show",
];

#[test]
fn vocabulary_is_exactly_the_listed_strings() {
    let printed: Vec<&str> = PermissionAction::ALL.iter().map(|a| a.as_str()).collect();
    assert_eq!(printed, VOCABULARY);
    for text in VOCABULARY {
        let action = PermissionAction::from_str(text).unwrap();
        assert_eq!(action.to_string(), text);
        let json = serde_json::to_string(&action).unwrap();
        assert_eq!(json, format!("\"{text}\""));
        assert_eq!(serde_json::from_str::<PermissionAction>(&json).unwrap(), action);
    }
}

#[test]
fn near_misses_are_rejected() {
    for bad in ["Request:create", "request:aproval", "request", "asset:", ":edit", "universitypart:create", ""] {
        assert!(PermissionAction::from_str(bad).is_err(), "{bad}");
    }
}

#[test]
fn enum_texts_round_trip() {
    for s in AssetState::ALL {
        assert_eq!(AssetState::parse(s.as_str()).unwrap(), s);
    }
    for s in RequestStatus::ALL {
        assert_eq!(RequestStatus::parse(s.as_str()).unwrap(), s);
    }
    for k in [UnitKind::University, UnitKind::Faculty, UnitKind::Department, UnitKind::External] {
        assert_eq!(UnitKind::parse(k.as_str()).unwrap(), k);
    }
}

proptest! {
    #[test]
    fn parse_accepts_only_vocabulary(s in "[a-zA-Z:]{0,24}") {
        let parsed = PermissionAction::from_str(&s);
        prop_assert_eq!(parsed.is_ok(), VOCABULARY.contains(&s.as_str()));
        if let Ok(a) = parsed {
            prop_assert_eq!(a.as_str(), s.as_str());
        }
    }

    #[test]
    fn print_parse_is_identity(i in 0usize..28) {
        let a = PermissionAction::ALL[i];
        prop_assert_eq!(PermissionAction::from_str(a.as_str()).unwrap(), a);
    }
}
