//! Recursive-descent parser for the SELECT grammar.

use thiserror::Error;

use super::lexer::{lex, Kw, Tok};
use super::*;

#[derive(Debug, Error, PartialEq)]
#[error("{message} at byte {position}")]
pub struct ParseError {
    pub message: String,
    pub position: usize,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    input_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, o)| *o)
            .unwrap_or(self.input_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            message: message.into(),
            position: self.offset(),
        })
    }

    fn eat_kw(&mut self, kw: Kw) -> bool {
        if matches!(self.peek(), Some(Tok::Kw(k)) if *k == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: Kw) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!(
                "expected {}, found {}",
                kw.text(),
                self.describe_peek()
            ))
        }
    }

    fn expect_tok(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}, found {}", self.describe_peek()))
        }
    }

    fn describe_peek(&self) -> String {
        match self.peek() {
            None => "end of input".to_string(),
            Some(Tok::Ident { text, .. }) => format!("identifier `{text}`"),
            Some(Tok::Str(_)) => "string literal".to_string(),
            Some(Tok::Int(v)) => format!("number {v}"),
            Some(Tok::Float(v)) => format!("number {v}"),
            Some(Tok::Kw(k)) => format!("keyword {}", k.text()),
            Some(t) => format!("`{}`", t.symbol_text()),
        }
    }

    /// Identifier, also accepting aggregate-function keywords used as names
    /// (only when not followed by an opening paren) and bare TRUE/FALSE-free
    /// keywords never valid here.
    fn ident(&mut self, what: &str) -> Result<(String, bool), ParseError> {
        match self.peek() {
            Some(Tok::Ident { .. }) => {
                if let Some(Tok::Ident {
                    text,
                    double_quoted,
                }) = self.bump()
                {
                    Ok((text, double_quoted))
                } else {
                    unreachable!()
                }
            }
            Some(Tok::Kw(k @ (Kw::Count | Kw::Sum | Kw::Avg | Kw::Min | Kw::Max)))
                if self.peek2() != Some(&Tok::LParen) =>
            {
                let text = k.text().to_lowercase();
                self.pos += 1;
                Ok((text, false))
            }
            _ => self.err(format!("expected {what}, found {}", self.describe_peek())),
        }
    }

    fn column_expr(&mut self) -> Result<ColumnExpr, ParseError> {
        let (first, dq) = self.ident("column name")?;
        if self.peek() == Some(&Tok::Dot) {
            self.pos += 1;
            let (col, dq2) = self.ident("column name after `.`")?;
            Ok(ColumnExpr {
                qualifier: Some(first),
                column: col,
                double_quoted: dq2,
            })
        } else {
            Ok(ColumnExpr {
                qualifier: None,
                column: first,
                double_quoted: dq,
            })
        }
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(Literal::Int(v))
            }
            Some(Tok::Float(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(Literal::Float(v))
            }
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(Literal::Str(s))
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                match self.peek() {
                    Some(Tok::Int(v)) => {
                        let v = *v;
                        self.pos += 1;
                        Ok(Literal::Int(-v))
                    }
                    Some(Tok::Float(v)) => {
                        let v = *v;
                        self.pos += 1;
                        Ok(Literal::Float(-v))
                    }
                    _ => self.err("expected a number after `-`"),
                }
            }
            Some(Tok::Kw(Kw::Null)) => {
                self.pos += 1;
                Ok(Literal::Null)
            }
            Some(Tok::Kw(Kw::True)) => {
                self.pos += 1;
                Ok(Literal::Bool(true))
            }
            Some(Tok::Kw(Kw::False)) => {
                self.pos += 1;
                Ok(Literal::Bool(false))
            }
            _ => self.err(format!(
                "expected a literal, found {}",
                self.describe_peek()
            )),
        }
    }

    fn is_literal_start(&self) -> bool {
        matches!(
            self.peek(),
            Some(
                Tok::Int(_)
                    | Tok::Float(_)
                    | Tok::Str(_)
                    | Tok::Minus
                    | Tok::Kw(Kw::Null | Kw::True | Kw::False)
            )
        )
    }

    fn agg_func(&mut self) -> Option<AggFunc> {
        let func = match self.peek() {
            Some(Tok::Kw(Kw::Count)) => AggFunc::Count,
            Some(Tok::Kw(Kw::Sum)) => AggFunc::Sum,
            Some(Tok::Kw(Kw::Avg)) => AggFunc::Avg,
            Some(Tok::Kw(Kw::Min)) => AggFunc::Min,
            Some(Tok::Kw(Kw::Max)) => AggFunc::Max,
            _ => return None,
        };
        if self.peek2() == Some(&Tok::LParen) {
            self.pos += 2;
            Some(func)
        } else {
            None
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        if let Some(func) = self.agg_func() {
            let distinct = self.eat_kw(Kw::Distinct);
            let arg = if self.peek() == Some(&Tok::Star) {
                self.pos += 1;
                AggArg::Star
            } else {
                AggArg::Column(self.column_expr()?)
            };
            self.expect_tok(Tok::RParen, "`)` closing the aggregate")?;
            return Ok(Expr::Aggregate(AggExpr {
                func,
                distinct,
                arg,
            }));
        }
        Ok(Expr::Column(self.column_expr()?))
    }

    fn select_items(&mut self) -> Result<Vec<SelectItem>, ParseError> {
        let mut items = Vec::new();
        loop {
            if self.peek() == Some(&Tok::Star) {
                self.pos += 1;
                items.push(SelectItem::Star);
            } else {
                items.push(SelectItem::Expr(self.expr()?));
            }
            if self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(items)
    }

    fn table_ref(&mut self) -> Result<TableRef, ParseError> {
        let (table, _) = self.ident("table name")?;
        let alias = if self.eat_kw(Kw::As) {
            Some(self.ident("alias after AS")?.0)
        } else if matches!(self.peek(), Some(Tok::Ident { .. })) {
            Some(self.ident("alias")?.0)
        } else {
            None
        };
        Ok(TableRef { table, alias })
    }

    fn parse_from_spec(&mut self) -> Result<FromSpec, ParseError> {
        let base = self.table_ref()?;
        let mut joins = Vec::new();
        loop {
            if matches!(
                self.peek(),
                Some(Tok::Kw(Kw::Left | Kw::Right | Kw::Full | Kw::Cross))
            ) {
                return self.err("only INNER JOIN is supported");
            }
            let inner = self.eat_kw(Kw::Inner);
            if !self.eat_kw(Kw::Join) {
                if inner {
                    return self.err("expected JOIN after INNER");
                }
                if self.peek() == Some(&Tok::Comma) {
                    return self.err("comma joins are not supported; use INNER JOIN ... ON");
                }
                break;
            }
            let table = self.table_ref()?;
            self.expect_kw(Kw::On)?;
            let left = self.column_expr()?;
            self.expect_tok(Tok::Eq, "`=` in join condition")?;
            let right = self.column_expr()?;
            joins.push(Join { table, left, right });
        }
        Ok(FromSpec { base, joins })
    }

    fn compare_op(&mut self) -> Option<CompareOp> {
        let op = match self.peek() {
            Some(Tok::Eq) => CompareOp::Eq,
            Some(Tok::Ne) => CompareOp::Ne,
            Some(Tok::Lt) => CompareOp::Lt,
            Some(Tok::Le) => CompareOp::Le,
            Some(Tok::Gt) => CompareOp::Gt,
            Some(Tok::Ge) => CompareOp::Ge,
            _ => return None,
        };
        self.pos += 1;
        Some(op)
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let sub = self.select_stmt()?;
            self.expect_tok(Tok::RParen, "`)` closing the subquery")?;
            return Ok(Operand::Subquery(Box::new(sub)));
        }
        if self.is_literal_start() {
            return Ok(Operand::Literal(self.literal()?));
        }
        Ok(Operand::Column(self.column_expr()?))
    }

    fn condition(&mut self) -> Result<Condition, ParseError> {
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let nodes = self.condition_list()?;
            self.expect_tok(Tok::RParen, "`)` closing the condition group")?;
            return Ok(Condition::Group(nodes));
        }
        let column = self.column_expr()?;
        if self.eat_kw(Kw::Is) {
            let negated = self.eat_kw(Kw::Not);
            self.expect_kw(Kw::Null)?;
            return Ok(Condition::IsNull { column, negated });
        }
        let negated = self.eat_kw(Kw::Not);
        if self.eat_kw(Kw::In) {
            self.expect_tok(Tok::LParen, "`(` after IN")?;
            if matches!(self.peek(), Some(Tok::Kw(Kw::Select))) {
                let sub = self.select_stmt()?;
                self.expect_tok(Tok::RParen, "`)` closing the subquery")?;
                return Ok(Condition::InSubquery {
                    column,
                    negated,
                    subquery: Box::new(sub),
                });
            }
            let mut items = vec![self.literal()?];
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                items.push(self.literal()?);
            }
            self.expect_tok(Tok::RParen, "`)` closing the IN list")?;
            return Ok(Condition::InList {
                column,
                negated,
                items,
            });
        }
        if self.eat_kw(Kw::Between) {
            let lo = self.literal()?;
            self.expect_kw(Kw::And)?;
            let hi = self.literal()?;
            return Ok(Condition::Between {
                column,
                negated,
                lo,
                hi,
            });
        }
        if self.eat_kw(Kw::Like) {
            let pattern = match self.literal()? {
                Literal::Str(s) => s,
                _ => return self.err("LIKE pattern must be a string"),
            };
            return Ok(Condition::Like {
                column,
                negated,
                pattern,
            });
        }
        if negated {
            return self.err("expected IN, BETWEEN, or LIKE after NOT");
        }
        match self.compare_op() {
            Some(op) => {
                let rhs = self.operand()?;
                Ok(Condition::Compare { column, op, rhs })
            }
            None => self.err(format!(
                "expected a comparison operator, found {}",
                self.describe_peek()
            )),
        }
    }

    fn condition_list(&mut self) -> Result<Vec<ConditionNode>, ParseError> {
        let mut nodes = vec![ConditionNode {
            connector: Connector::And,
            condition: self.condition()?,
            provenance: Provenance::Mined,
        }];
        loop {
            let connector = if self.eat_kw(Kw::And) {
                Connector::And
            } else if self.eat_kw(Kw::Or) {
                Connector::Or
            } else {
                break;
            };
            nodes.push(ConditionNode {
                connector,
                condition: self.condition()?,
                provenance: Provenance::Mined,
            });
        }
        Ok(nodes)
    }

    fn having_list(&mut self) -> Result<Vec<HavingCond>, ParseError> {
        let mut out = Vec::new();
        let mut connector = Connector::And;
        loop {
            let lhs = self.expr()?;
            let op = match self.compare_op() {
                Some(op) => op,
                None => return self.err("expected a comparison operator in HAVING"),
            };
            let rhs = self.operand()?;
            out.push(HavingCond {
                connector,
                lhs,
                op,
                rhs,
            });
            if self.eat_kw(Kw::And) {
                connector = Connector::And;
            } else if self.eat_kw(Kw::Or) {
                connector = Connector::Or;
            } else {
                break;
            }
        }
        Ok(out)
    }

    fn select_stmt(&mut self) -> Result<SelectStmt, ParseError> {
        if matches!(self.peek(), Some(Tok::Kw(Kw::With))) {
            return self.err("WITH / common table expressions are not in the evolution grammar");
        }
        self.expect_kw(Kw::Select)?;
        let distinct = self.eat_kw(Kw::Distinct);
        let projection = self.select_items()?;
        self.expect_kw(Kw::From)?;
        let from = self.parse_from_spec()?;

        let where_clause = if self.eat_kw(Kw::Where) {
            self.condition_list()?
        } else {
            Vec::new()
        };

        let mut group_by = Vec::new();
        if self.eat_kw(Kw::Group) {
            self.expect_kw(Kw::By)?;
            group_by.push(self.column_expr()?);
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                group_by.push(self.column_expr()?);
            }
        }

        let having = if self.eat_kw(Kw::Having) {
            self.having_list()?
        } else {
            Vec::new()
        };

        let mut order_by = Vec::new();
        if self.eat_kw(Kw::Order) {
            self.expect_kw(Kw::By)?;
            loop {
                let expr = self.expr()?;
                let desc = if self.eat_kw(Kw::Desc) {
                    true
                } else {
                    self.eat_kw(Kw::Asc);
                    false
                };
                order_by.push(OrderItem { expr, desc });
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }

        let limit = if self.eat_kw(Kw::Limit) {
            match self.peek() {
                Some(Tok::Int(v)) if *v >= 0 => {
                    let v = *v as u64;
                    self.pos += 1;
                    Some(v)
                }
                _ => return self.err("LIMIT expects a non-negative integer"),
            }
        } else {
            None
        };

        if matches!(
            self.peek(),
            Some(Tok::Kw(Kw::Union | Kw::Intersect | Kw::Except))
        ) {
            return self.err("set operations are not in the evolution grammar");
        }

        Ok(SelectStmt {
            distinct,
            projection,
            from,
            where_clause,
            group_by,
            having,
            order_by,
            limit,
        })
    }
}

/// Parses one SELECT statement; trailing semicolons are tolerated, anything
/// else after the statement is an error.
pub fn parse_select(sql: &str) -> Result<SelectStmt, ParseError> {
    let toks = lex(sql).map_err(|e| ParseError {
        message: e.message,
        position: e.position,
    })?;
    let input_len = sql.len();
    let mut p = Parser {
        toks,
        pos: 0,
        input_len,
    };
    let stmt = p.select_stmt()?;
    while p.peek() == Some(&Tok::Semi) {
        p.pos += 1;
    }
    if p.peek().is_some() {
        return p.err(format!(
            "unexpected trailing {} after the statement",
            p.describe_peek()
        ));
    }
    Ok(stmt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_join_filter_shape() {
        let stmt = parse_select(
            "SELECT price.id FROM price INNER JOIN production ON price.id = production.id \
             WHERE production.country = 'USA' AND price.price < 15000",
        )
        .unwrap();
        assert_eq!(stmt.projection.len(), 1);
        assert_eq!(stmt.from.joins.len(), 1);
        assert_eq!(stmt.leaf_count(), 2);
        assert_eq!(stmt.where_clause[1].connector, Connector::And);
    }

    #[test]
    fn no_where_means_zero_leaves() {
        let stmt = parse_select("SELECT a FROM t").unwrap();
        assert_eq!(stmt.leaf_count(), 0);
    }

    #[test]
    fn malformed_keyword_errors_with_position() {
        let err = parse_select("SELECT * FORM t").unwrap_err();
        assert!(err.message.contains("FORM"), "{}", err.message);
        assert_eq!(err.position, 9);
    }

    #[test]
    fn aggregates_group_having_order_limit() {
        let stmt = parse_select(
            "SELECT country, COUNT(*) FROM maker GROUP BY country \
             HAVING COUNT(*) > 2 ORDER BY country DESC LIMIT 3",
        )
        .unwrap();
        assert_eq!(stmt.group_by.len(), 1);
        assert_eq!(stmt.having.len(), 1);
        assert!(stmt.order_by[0].desc);
        assert_eq!(stmt.limit, Some(3));
    }

    #[test]
    fn subqueries_parse() {
        let stmt = parse_select(
            "SELECT name FROM maker WHERE id IN (SELECT maker_id FROM production) \
             AND country = (SELECT country FROM maker WHERE name = 'x')",
        )
        .unwrap();
        assert_eq!(stmt.leaf_count(), 2);
        assert!(matches!(
            stmt.where_clause[0].condition,
            Condition::InSubquery { .. }
        ));
    }

    #[test]
    fn grouped_conditions_count_as_one_leaf() {
        let stmt = parse_select("SELECT a FROM t WHERE (x > 1 OR y > 2) AND z = 3").unwrap();
        assert_eq!(stmt.leaf_count(), 2);
        assert!(matches!(
            stmt.where_clause[0].condition,
            Condition::Group(_)
        ));
    }

    #[test]
    fn unsupported_shapes_are_rejected() {
        assert!(parse_select("SELECT a FROM t LEFT JOIN u ON t.x = u.y").is_err());
        assert!(parse_select("SELECT a FROM t UNION SELECT b FROM u").is_err());
        assert!(parse_select("WITH c AS (SELECT 1) SELECT * FROM c").is_err());
        assert!(parse_select("INSERT INTO t VALUES (1)").is_err());
        assert!(parse_select("SELECT a FROM t; SELECT b FROM u").is_err());
    }

    #[test]
    fn not_variants() {
        let stmt = parse_select(
            "SELECT a FROM t WHERE x NOT IN (1, 2) AND y NOT LIKE 'a%' AND z IS NOT NULL \
             AND w NOT BETWEEN 1 AND 5",
        )
        .unwrap();
        assert_eq!(stmt.leaf_count(), 4);
    }
}
