/** Pure HTML renderers: every function maps state to markup, nothing more.
 *
 * Lists arrive ranked from the server and are rendered in that exact order,
 * capped at (3, 3, 5) per column. A column with no items shows an explicit
 * empty state so a missing category is visible at a glance.
 */

import { KeySentence, QueryResponse, RankedItem, ArticleDetail } from './api.js';
import { ViewState } from './state.js';

export const LIST_CAPS = { agree: 3, disagree: 3, discuss: 5 } as const;

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

function escapeRegExp(raw: string): string {
  return raw.replace(/[.*+?^${}()|[\]\\]/g, '\\$&');
}

/** Words of the question worth emphasizing inside snippets. */
export function highlightTerms(question: string): string[] {
  const words = question.toLowerCase().match(/[\p{L}\p{N}]+(?:['-][\p{L}\p{N}]+)*/gu) ?? [];
  return [...new Set(words.filter((w) => w.length >= 3))];
}

export function renderSnippet(sentence: KeySentence, terms: string[]): string {
  let text = escapeHtml(sentence.text);
  for (const term of terms) {
    const pattern = new RegExp(`\\b(${escapeRegExp(escapeHtml(term))})\\b`, 'gi');
    text = text.replace(pattern, '<mark>$1</mark>');
  }
  return `<li class="snippet"><span class="similarity">${sentence.similarity.toFixed(3)}</span> ${text}</li>`;
}

export function renderSnippets(item: RankedItem, terms: string[]): string {
  if (item.key_sentences.length === 0) {
    return '<ul class="snippets"></ul>';
  }
  const rows = item.key_sentences.map((s) => renderSnippet(s, terms)).join('');
  return `<ul class="snippets">${rows}</ul>`;
}

export function renderItem(item: RankedItem, terms: string[]): string {
  const title = escapeHtml(item.title || `article ${item.article_id}`);
  return [
    `<article class="result" data-article-id="${item.article_id}">`,
    `<header><button class="drill" data-article-id="${item.article_id}">${title}</button>`,
    `<span class="score">p=${item.p.toFixed(3)}</span></header>`,
    renderSnippets(item, terms),
    '</article>',
  ].join('');
}

export function renderColumn(
  label: 'agree' | 'disagree' | 'discuss',
  items: RankedItem[],
  terms: string[],
): string {
  const capped = items.slice(0, LIST_CAPS[label]);
  const body = capped.length
    ? capped.map((item) => renderItem(item, terms)).join('')
    : '<p class="empty-state">no articles in this category</p>';
  return [
    `<section class="column column-${label}" data-column="${label}">`,
    `<h2>${label} <span class="count">(${capped.length})</span></h2>`,
    body,
    '</section>',
  ].join('');
}

export function renderColumns(result: QueryResponse, question: string): string {
  const terms = highlightTerms(question);
  return [
    renderColumn('agree', result.agree, terms),
    renderColumn('disagree', result.disagree, terms),
    renderColumn('discuss', result.discuss, terms),
  ].join('');
}

export function renderArticlePanel(article: ArticleDetail): string {
  const sentences = article.sentences.map((s) => `<p>${escapeHtml(s)}</p>`).join('');
  return [
    `<aside class="article-panel" data-article-id="${article.article_id}">`,
    `<header><h3>article ${article.article_id}</h3>`,
    '<button class="close-panel">close</button></header>',
    sentences,
    '</aside>',
  ].join('');
}

export function renderApp(state: ViewState): string {
  const parts: string[] = [];
  if (state.error) {
    parts.push(`<div class="error-banner" role="alert">${escapeHtml(state.error)}</div>`);
  }
  if (state.loading) {
    parts.push('<div class="loading">searching&hellip;</div>');
  }
  if (state.result) {
    parts.push(`<div class="columns">${renderColumns(state.result, state.question)}</div>`);
    parts.push(`<footer class="timing">${state.result.timing_ms.toFixed(0)} ms</footer>`);
  } else if (!state.loading) {
    parts.push('<p class="hint">ask an investigative question to see agreeing, disagreeing, and discussing coverage</p>');
  }
  if (state.article) {
    parts.push(renderArticlePanel(state.article));
  }
  return parts.join('');
}
