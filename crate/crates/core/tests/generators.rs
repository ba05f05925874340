use proptest::prelude::*;
use ul_core::eval::Mutant;
use ul_core::testkit::*;
use ul_core::*;

fn twenty_types() -> Vec<UType> {
    let b = UType::sum(UType::Unit, UType::Unit);
    let mut ts = vec![
        UType::Unit,
        b.clone(),
        UType::prod(b.clone(), UType::Unit),
        UType::fun(UType::Unit, UType::Unit),
        UType::fun(b.clone(), b.clone()),
        UType::fun(UType::fun(UType::Unit, b.clone()), b.clone()),
        nat(),
        list(b.clone()),
        list(nat()),
        UType::prod(nat(), list(UType::Unit)),
        UType::sum(nat(), UType::fun(nat(), nat())),
        UType::forall("a", UType::fun(UType::var("a"), UType::var("a"))),
        UType::fun(list(nat()), list(nat())),
        UType::prod(UType::fun(UType::Unit, nat()), b.clone()),
    ];
    let mut g = Gen::new(99);
    while ts.len() < 20 {
        ts.push(g.utype(2));
    }
    ts
}

#[test]
fn canonical_fallback_at_budget_zero() {
    assert_eq!(gen_u_term(&MixedContext::new(), &UType::Unit, 0, 11).unwrap(), UExpr::Unit);
    let c = gen_l_config(&MixedContext::new(), &LType::Unit, 0, 11).unwrap();
    assert!(c.store.is_empty() && c.expr == LExpr::Unit);
}

#[test]
fn unit_to_unit_terms_typecheck() {
    let t = UType::fun(UType::Unit, UType::Unit);
    for seed in 0..200 {
        let e = gen_u_term(&MixedContext::new(), &t, 3, seed).unwrap();
        assert_eq!(typecheck_u(&MixedContext::new(), &e).unwrap(), t);
    }
}

#[test]
fn ten_thousand_u_terms_over_twenty_types_typecheck() {
    let types = twenty_types();
    for (i, t) in types.iter().enumerate() {
        for k in 0..500u64 {
            let seed = (i as u64) << 32 | k;
            let e = gen_u_term(&MixedContext::new(), t, (k % 16) as usize, seed).unwrap();
            let got = typecheck_u(&MixedContext::new(), &e).unwrap_or_else(|err| panic!("{err}\n{e}"));
            assert!(alpha_eq_utype(&got, t), "{e} : {got}, wanted {t}");
        }
    }
}

#[test]
fn ten_thousand_l_configurations_typecheck() {
    let mut nonempty = 0;
    for seed in 0..10_000u64 {
        let mut g = Gen::new(seed);
        let t = g.ltype(2);
        let c = gen_l_config(&MixedContext::new(), &t, (seed % 20) as usize, seed).unwrap();
        let (got, _) = check_config(&c.store, &c.expr).unwrap_or_else(|e| panic!("{e}\n<{}, {}>", c.store, c.expr));
        assert!(alpha_eq_ltype(&got, &t), "{got} vs {t}");
        nonempty += usize::from(!c.store.is_empty());
    }
    assert!(nonempty > 500, "only {nonempty} configurations had a store");
}

#[test]
fn boxes_give_nonempty_stores() {
    let t = LType::boxed(LType::Unit);
    let hits = (0..200).filter(|&s| !gen_l_config(&MixedContext::new(), &t, 6, s).unwrap().store.is_empty()).count();
    assert!(hits > 0);
}

#[test]
fn every_surface_construct_is_generated() {
    let mut seen = std::collections::BTreeSet::new();
    for seed in 0..2000u64 {
        let mut g = Gen::new(seed);
        let t = g.ltype(2);
        let c = gen_l_config(&MixedContext::new(), &t, 16, seed).unwrap();
        c.expr.visit(&mut |n| {
            if let Node::L(e) = n {
                let k = format!("{e:?}");
                seen.insert(k[..k.find('(').unwrap_or(k.len())].to_string());
            }
        });
    }
    for k in [
        "Var", "Unit", "Pair", "LetPair", "LetUnit", "Lam", "App", "Inj", "Case", "Fold", "Unfold", "Share", "Copy",
        "New", "Free", "BoxUp", "Unbox", "Loc", "FromU", "Lump", "Unlump", "Phase", "LumpVal",
    ] {
        assert!(seen.contains(k), "{k} never generated; saw {seen:?}");
    }
}

#[test]
fn bare_type_variables_are_uninhabited() {
    let ctx = MixedContext::new().with("a", Binding::TyVar);
    assert!(gen_u_term(&ctx, &UType::var("a"), 4, 1).is_err());
}

#[test]
fn empty_runs_give_empty_reports() {
    let r = check_subject_reduction(0, 50, 0);
    assert_eq!((r.samples, r.failures), (0, 0));
    let r = check_differential(0, 100, 0);
    assert_eq!((r.samples, r.failures), (0, 0));
}

#[test]
fn reports_are_reproducible() {
    let a = check_subject_reduction_with(150, 50, 42, Some(Mutant::WrongCopySplit));
    let b = check_subject_reduction_with(150, 50, 42, Some(Mutant::WrongCopySplit));
    assert_eq!((a.samples, a.failures, &a.counters, &a.counterexample), (b.samples, b.failures, &b.counters, &b.counterexample));
    assert!(a.failures > 0);
}

#[test]
fn diverging_programs_run_out_of_fuel_on_both_sides() {
    let e = ul_core::parser::parse_uexpr("(fix f (x : unit) : unit = f x) ()").unwrap();
    assert_eq!(differential_one(&e, 200), Agreement::BothDiverge);
}

#[test]
fn shrinking_keeps_failures_well_typed() {
    let m = Some(Mutant::FoldUnfoldNonCancelling);
    let mut shrunk = 0;
    for seed in 0..400u64 {
        let mut g = Gen::new(seed);
        let t = g.ltype(2);
        let c = gen_l_config(&MixedContext::new(), &t, 14, seed).unwrap();
        if !c.store.is_empty() || subject_reduction_one(&c.store, &c.expr, 50, m).is_ok() {
            continue;
        }
        let small = shrink_sr(&c.store, &c.expr, 50, m);
        assert!(check_config(&c.store, &small).is_ok());
        assert!(subject_reduction_one(&c.store, &small, 50, m).is_err());
        assert!(small.size() <= c.expr.size());
        shrunk += 1;
    }
    assert!(shrunk > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_u_terms_have_their_type(seed in any::<u64>(), depth in 0usize..3, budget in 0usize..20) {
        let t = Gen::new(seed).utype(depth);
        let e = gen_u_term(&MixedContext::new(), &t, budget, seed).unwrap();
        let got = typecheck_u(&MixedContext::new(), &e).unwrap();
        prop_assert!(alpha_eq_utype(&got, &t));
    }

    #[test]
    fn generated_configurations_preserve_types(seed in any::<u64>(), budget in 0usize..24) {
        let t = Gen::new(seed).ltype(2);
        let c = gen_l_config(&MixedContext::new(), &t, budget, seed).unwrap();
        prop_assert!(subject_reduction_one(&c.store, &c.expr, 50, None).is_ok());
    }

    #[test]
    fn open_configurations_consume_linear_context(seed in any::<u64>(), budget in 0usize..12) {
        let mut g = Gen::new(seed);
        let (a, b) = (g.ltype(1), g.ltype(1));
        let t = g.ltype(1);
        let ctx = MixedContext::new().with("x", Binding::L(a)).with("y", Binding::L(b));
        let c = gen_l_config(&ctx, &t, budget, seed).unwrap();
        let (got, _) = typecheck_l_surface(&ctx, &c.expr).unwrap();
        prop_assert!(alpha_eq_ltype(&got, &t));
    }

    #[test]
    fn first_order_conversions_round_trip(seed in any::<u64>()) {
        let mut g = Gen::new(seed);
        let t = g.compat_ltype(3, false);
        let tau = recover_u(&t).unwrap();
        prop_assert!(compat(&CompatEnv::new(), &tau, &t));
        let e = gen_u_term(&MixedContext::new(), &tau, 6, seed).unwrap();
        if let Some(v) = run(&e, 100_000).0.value() {
            let mut supply = LocSupply::starting_at(0);
            let w = u_to_l(v, &t, &mut supply).unwrap();
            prop_assert!(alpha_eq_uexpr(&l_to_u(&w, &t).unwrap(), v));
        }
    }

    #[test]
    fn fresh_name_renumbering_is_idempotent(s in "[a-z$0-9 ]{0,40}") {
        let once = ul_core::error::canonical_fresh_names(&s);
        prop_assert_eq!(ul_core::error::canonical_fresh_names(&once), once.clone());
    }
}
