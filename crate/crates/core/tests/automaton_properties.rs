use dyck_rnn::dyck::{self, DfaState, DyckParams, Token};
use dyck_rnn::network::{Construction, Network};
use dyck_rnn::numerics::NumericConfig;
use proptest::prelude::*;

/// Independent membership check: brackets well nested, every prefix depth at
/// most m, a single trailing end symbol.
fn direct_member(k: usize, m: usize, w: &[Token]) -> bool {
    let Some((last, body)) = w.split_last() else {
        return false;
    };
    if *last != Token::End {
        return false;
    }
    let mut open = Vec::new();
    for t in body {
        match *t {
            Token::Open(i) if i <= k => {
                open.push(i);
                if open.len() > m {
                    return false;
                }
            }
            Token::Close(i) if i <= k => {
                if open.pop() != Some(i) {
                    return false;
                }
            }
            _ => return false,
        }
    }
    open.is_empty()
}

fn all_strings(vocab: &[Token], max_len: usize) -> Vec<Vec<Token>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .into_iter()
            .flat_map(|w: Vec<Token>| {
                vocab.iter().map(move |t| {
                    let mut v = w.clone();
                    v.push(*t);
                    v
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

#[test]
fn automaton_agrees_with_direct_checker_up_to_length_8() {
    let params = DyckParams::new(2, 2).unwrap();
    let vocab = params.vocabulary();
    let mut members = 0;
    for w in all_strings(&vocab, 8) {
        let expect = direct_member(2, 2, &w);
        assert_eq!(dyck::is_member(&params, &w), expect, "{}", dyck::render(&w));
        members += expect as usize;
    }
    // depth-2 Dyck paths of semilength n number 2^(n-1), each with 2^n labelings
    assert_eq!(members, 1 + 2 + 2 * 4 + 4 * 8);
}

fn arb_string(k: usize, max: usize) -> impl Strategy<Value = Vec<Token>> {
    let tok = prop_oneof![
        (1..=k).prop_map(Token::Open),
        (1..=k).prop_map(Token::Close),
        Just(Token::End),
    ];
    proptest::collection::vec(tok, 0..max)
}

/// A member string obtained by random pushes and pops.
fn arb_member(k: usize, m: usize) -> impl Strategy<Value = Vec<Token>> {
    proptest::collection::vec((any::<bool>(), 1..=k), 0..40).prop_map(move |moves| {
        let mut stack = Vec::new();
        let mut out = Vec::new();
        for (push, i) in moves {
            if (push && stack.len() < m) || stack.is_empty() {
                stack.push(i);
                out.push(Token::Open(i));
            } else {
                out.push(Token::Close(stack.pop().unwrap()));
            }
        }
        out.extend(dyck::completion(&stack));
        out
    })
}

proptest! {
    #[test]
    fn membership_matches_direct_checker(k in 1usize..4, m in 1usize..4, w in arb_string(3, 14)) {
        let params = DyckParams::new(k, m).unwrap();
        let w: Vec<Token> = w.into_iter().filter(|t| params.check_token(*t).is_ok()).collect();
        prop_assert_eq!(dyck::is_member(&params, &w), direct_member(k, m, &w));
    }

    #[test]
    fn transition_deterministic_and_reject_absorbing(k in 1usize..4, m in 1usize..4, w in arb_string(3, 12)) {
        let params = DyckParams::new(k, m).unwrap();
        let w: Vec<Token> = w.into_iter().filter(|t| params.check_token(*t).is_ok()).collect();
        prop_assert_eq!(dyck::run(&params, &w), dyck::run(&params, &w));
        let mut q = DfaState::initial();
        for t in &w {
            let next = dyck::transition(&params, &q, *t);
            if q.is_reject() {
                prop_assert!(next.is_reject());
            }
            if let DfaState::Stack(s) = &next {
                prop_assert!(s.len() <= m);
            }
            q = next;
        }
    }

    #[test]
    fn member_prefixes_are_stack_states(k in 1usize..5, m in 1usize..5, seed in arb_member(4, 4)) {
        let params = DyckParams::new(k, m).unwrap();
        // regenerate within (k, m)
        let mut stack = Vec::new();
        let mut w = Vec::new();
        for t in seed {
            match t {
                Token::Open(i) if stack.len() < m => {
                    let i = (i - 1) % k + 1;
                    stack.push(i);
                    w.push(Token::Open(i));
                }
                Token::Close(_) if !stack.is_empty() => {
                    w.push(Token::Close(stack.pop().unwrap()));
                }
                _ => {}
            }
        }
        w.extend(dyck::completion(&stack));
        prop_assert!(dyck::is_member(&params, &w));
        for t in 0..w.len() {
            let q = dyck::run(&params, &w[..t]);
            let s = q.stack();
            prop_assert!(s.is_some());
            prop_assert_eq!(s.unwrap().len() as i64, dyck::depth(&w[..t]));
        }
    }

    #[test]
    fn networks_track_the_automaton_on_random_members(idx in 0usize..5, w in arb_member(3, 3)) {
        let params = DyckParams::new(3, 3).unwrap();
        let c = Construction::all()[idx];
        let net = Network::build(c, &params, &NumericConfig::for_k(3)).unwrap();
        let eps = NumericConfig::epsilon(3);
        let mut state = net.initial_state();
        for (t, tok) in w.iter().enumerate() {
            prop_assert_eq!(net.decode_stack(&state).unwrap(), dyck::run(&params, &w[..t]));
            let p = net.next_distribution(&state);
            prop_assert!(p[tok.vocab_index(3)] >= eps);
            if *tok != Token::End {
                net.advance(&mut state, *tok).unwrap();
            }
        }
    }
}
