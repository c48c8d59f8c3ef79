/** Typed client for the query service. */

export interface KeySentence {
  text: string;
  similarity: number;
}

export interface RankedItem {
  article_id: number;
  title: string;
  p: number;
  rel: number;
  beta: number | null;
  key_sentences: KeySentence[];
}

export interface QueryResponse {
  agree: RankedItem[];
  disagree: RankedItem[];
  discuss: RankedItem[];
  timing_ms: number;
}

export interface ArticleDetail {
  article_id: number;
  text: string;
  sentences: string[];
}

export class ApiError extends Error {
  readonly status: number;

  constructor(message: string, status: number) {
    super(message);
    this.status = status;
  }
}

async function requestJson<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    let detail = response.statusText || `request failed (${response.status})`;
    try {
      const body = (await response.json()) as { detail?: unknown };
      if (typeof body.detail === 'string') detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(detail, response.status);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  query(question: string, signal?: AbortSignal): Promise<QueryResponse> {
    return requestJson<QueryResponse>(`${this.baseUrl}/api/query`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ question }),
      signal,
    });
  }

  article(articleId: number, signal?: AbortSignal): Promise<ArticleDetail> {
    return requestJson<ArticleDetail>(`${this.baseUrl}/api/article/${articleId}`, { signal });
  }
}
