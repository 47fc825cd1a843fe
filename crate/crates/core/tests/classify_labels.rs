use stratos::dsl;
use stratos::model::{UnitId, WorldState};
use stratos::transformations::{classify, labels, TransformationKind as Kind};

const BASE: &str = "unit U {}\nunit V {}\nsource_type X singleton=false\nsource S : X owned_by V\ntheme T by U\n";

fn world(extra: &str) -> WorldState {
    dsl::parse(&format!("{BASE}{extra}")).unwrap_or_else(|d| panic!("{}", d[0])).world
}

fn u() -> UnitId {
    UnitId::from("U")
}

const SERVED: &str = "use U S for T\ncontract C provider=V consumer=U theme=T period=(0, 10) notice=1\n";
const SELF_SERVED: &str = "source N : X owned_by U\nuse U N for T\n";

#[test]
fn developing_a_source_after_a_discharged_service_is_backservicing() {
    let pre = world(SERVED);
    let post = world(SELF_SERVED);
    assert!(classify(&pre, &post, &u()).unwrap().contains(Kind::DevelopSource));
    assert_eq!(labels(&pre, &post, &u()).unwrap(), ["backservicing"].into());
}

#[test]
fn a_committing_service_is_not_backserviced() {
    let pre = world(&format!("{SERVED}commit U to S event=0\n"));
    let post = world(&format!("{SELF_SERVED}commit U to S event=0\n"));
    assert!(labels(&pre, &post, &u()).unwrap().is_empty());
}

#[test]
fn keeping_the_service_is_not_backservicing() {
    let pre = world(SERVED);
    let post = world(&format!("{SERVED}{SELF_SERVED}"));
    assert!(labels(&pre, &post, &u()).unwrap().is_empty());
}
